// Copyright 2026 The otdro Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <vector>

#include "otdro/types.hpp"

namespace otdro {

enum class ConeKind { Zero, NonNegative, SecondOrder };

/// One block of a product cone. SecondOrder uses the (t, x) layout with
/// dim = 1 + length(x), i.e. { (t, x) : ||x||_2 <= t }.
struct ConeBlock {
  ConeKind kind;
  int dim;
};

/// Ordered product of cone blocks, K = K_1 x ... x K_B.
class ConeSpec {
 public:
  ConeSpec() = default;
  explicit ConeSpec(std::vector<ConeBlock> blocks);

  const std::vector<ConeBlock>& blocks() const { return blocks_; }
  int total_dim() const { return total_dim_; }
  bool empty() const { return blocks_.empty(); }

 private:
  std::vector<ConeBlock> blocks_;
  int total_dim_ = 0;
};

/// Euclidean projection onto K.
Vector project_primal(const ConeSpec& spec, const Vector& v);

/// Euclidean projection onto the dual cone K* (Zero blocks map to the full
/// space; NonNegative and SecondOrder blocks are self-dual).
Vector project_dual(const ConeSpec& spec, const Vector& v);

/// One element of the conservative Jacobian of project_dual at v,
/// block-diagonal per cone block. Tie rules: NonNegative entries at 0 and
/// second-order points with ||x|| = t take the limit from the cone interior;
/// ||x|| = -t takes the limit from the polar side; the apex v = 0 returns
/// (1/2) I.
Matrix projection_jacobian_dual(const ConeSpec& spec, const Vector& v);

/// Membership tests used by solver termination and tests.
bool in_cone(const ConeSpec& spec, const Vector& v, double tol);
bool in_dual_cone(const ConeSpec& spec, const Vector& v, double tol);

}  // namespace otdro

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

#include "otdro/cones.hpp"

#include <cmath>

namespace otdro {

ConeSpec::ConeSpec(std::vector<ConeBlock> blocks) : blocks_(std::move(blocks)) {
  for (const ConeBlock& b : blocks_) {
    require(b.dim >= 1, "cone block must have dim >= 1");
    require(b.kind != ConeKind::SecondOrder || b.dim >= 2,
            "second-order cone block must have dim >= 2");
    total_dim_ += b.dim;
  }
}

namespace {

// Projection of (t, x) onto { ||x|| <= t }.
void project_soc(Eigen::Ref<Vector> seg) {
  const int d = static_cast<int>(seg.size());
  const double t = seg(0);
  const double rho = seg.tail(d - 1).norm();
  if (rho <= t) return;
  if (rho <= -t) {
    seg.setZero();
    return;
  }
  const double a = 0.5 * (t + rho);
  seg.tail(d - 1) *= a / rho;
  seg(0) = a;
}

// Jacobian element of the SOC projection with the tie rules from the header.
Matrix soc_jacobian(const Eigen::Ref<const Vector>& seg) {
  const int d = static_cast<int>(seg.size());
  const double t = seg(0);
  const Vector x = seg.tail(d - 1);
  const double rho = x.norm();
  if (t == 0.0 && rho == 0.0) return 0.5 * Matrix::Identity(d, d);
  if (t >= rho) return Matrix::Identity(d, d);
  if (t <= -rho) return Matrix::Zero(d, d);
  Matrix jac(d, d);
  const Vector xh = x / rho;
  jac(0, 0) = 0.5;
  jac.row(0).tail(d - 1) = 0.5 * xh.transpose();
  jac.col(0).tail(d - 1) = 0.5 * xh;
  jac.bottomRightCorner(d - 1, d - 1) =
      0.5 * (1.0 + t / rho) * Matrix::Identity(d - 1, d - 1) -
      0.5 * (t / rho) * (xh * xh.transpose());
  return jac;
}

}  // namespace

Vector project_primal(const ConeSpec& spec, const Vector& v) {
  require(v.size() == spec.total_dim(), "project_primal: dimension mismatch");
  Vector out = v;
  int off = 0;
  for (const ConeBlock& b : spec.blocks()) {
    switch (b.kind) {
      case ConeKind::Zero:
        out.segment(off, b.dim).setZero();
        break;
      case ConeKind::NonNegative:
        out.segment(off, b.dim) = out.segment(off, b.dim).cwiseMax(0.0);
        break;
      case ConeKind::SecondOrder:
        project_soc(out.segment(off, b.dim));
        break;
    }
    off += b.dim;
  }
  return out;
}

Vector project_dual(const ConeSpec& spec, const Vector& v) {
  require(v.size() == spec.total_dim(), "project_dual: dimension mismatch");
  Vector out = v;
  int off = 0;
  for (const ConeBlock& b : spec.blocks()) {
    switch (b.kind) {
      case ConeKind::Zero:
        break;  // dual of {0} is the full space
      case ConeKind::NonNegative:
        out.segment(off, b.dim) = out.segment(off, b.dim).cwiseMax(0.0);
        break;
      case ConeKind::SecondOrder:
        project_soc(out.segment(off, b.dim));
        break;
    }
    off += b.dim;
  }
  return out;
}

Matrix projection_jacobian_dual(const ConeSpec& spec, const Vector& v) {
  require(v.size() == spec.total_dim(),
          "projection_jacobian_dual: dimension mismatch");
  const int m = spec.total_dim();
  Matrix jac = Matrix::Zero(m, m);
  int off = 0;
  for (const ConeBlock& b : spec.blocks()) {
    switch (b.kind) {
      case ConeKind::Zero:
        jac.block(off, off, b.dim, b.dim).setIdentity();
        break;
      case ConeKind::NonNegative:
        for (int i = 0; i < b.dim; ++i)
          jac(off + i, off + i) = v(off + i) >= 0.0 ? 1.0 : 0.0;
        break;
      case ConeKind::SecondOrder:
        jac.block(off, off, b.dim, b.dim) =
            soc_jacobian(v.segment(off, b.dim));
        break;
    }
    off += b.dim;
  }
  return jac;
}

bool in_cone(const ConeSpec& spec, const Vector& v, double tol) {
  if (v.size() != spec.total_dim()) return false;
  int off = 0;
  for (const ConeBlock& b : spec.blocks()) {
    switch (b.kind) {
      case ConeKind::Zero:
        if (v.segment(off, b.dim).lpNorm<Eigen::Infinity>() > tol) return false;
        break;
      case ConeKind::NonNegative:
        if (v.segment(off, b.dim).minCoeff() < -tol) return false;
        break;
      case ConeKind::SecondOrder:
        if (v.segment(off + 1, b.dim - 1).norm() > v(off) + tol) return false;
        break;
    }
    off += b.dim;
  }
  return true;
}

bool in_dual_cone(const ConeSpec& spec, const Vector& v, double tol) {
  if (v.size() != spec.total_dim()) return false;
  int off = 0;
  for (const ConeBlock& b : spec.blocks()) {
    switch (b.kind) {
      case ConeKind::Zero:
        break;
      case ConeKind::NonNegative:
        if (v.segment(off, b.dim).minCoeff() < -tol) return false;
        break;
      case ConeKind::SecondOrder:
        if (v.segment(off + 1, b.dim - 1).norm() > v(off) + tol) return false;
        break;
    }
    off += b.dim;
  }
  return true;
}

}  // namespace otdro

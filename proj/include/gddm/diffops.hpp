#pragma once

#include "gddm/field.hpp"

namespace gddm {

/// Forward differences of a field along rows (gu) and columns (gv).
///
/// Replicate boundary: the ghost pixel past the trailing edge equals the
/// edge pixel, so the last row of gu and the last column of gv are zero.
struct GradientField {
  Field gu;
  Field gv;
};

/// gu(u,v) = x(u+1,v) - x(u,v), gv(u,v) = x(u,v+1) - x(u,v), zero on the
/// trailing boundary.
GradientField forward_gradient(const Field& x);

/// Exact adjoint of forward_gradient under the flat inner product:
/// <forward_gradient(x), g> == <x, divergence_adjoint(g)>. Entries of g on
/// the trailing boundary do not contribute.
Field divergence_adjoint(const GradientField& g);

/// Finite-element Laplacian: 3x3 kernel with centre -1 and the four axial
/// neighbours 1/4, replicate padding. Equals 1/4 of the 5-point Laplacian
/// in the interior.
Field laplacian_fe(const Field& x);

/// divergence_adjoint(forward_gradient(x)), the positive semi-definite
/// normal operator. Equals -4 * laplacian_fe(x) on every pixel, boundary
/// included, up to rounding.
Field laplacian_lsq(const Field& x);

/// Adjoint of the discrete curl: maps a potential on the (H-1) x (W-1)
/// plaquettes (given as an H x W field whose last row and column are
/// ignored) to a gradient field with divergence_adjoint(g) == 0 up to
/// rounding.
GradientField curl_adjoint(const Field& potential);

/// Packs (gu, gv) into one field with 2C channels: gu channels first, then gv.
Field pack_gradient(const GradientField& g);
/// Inverse of pack_gradient; the channel count must be even.
GradientField unpack_gradient(const Field& packed);

}  // namespace gddm

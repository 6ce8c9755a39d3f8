#include "gddm/diffops.hpp"

#include <array>

#include "gddm/error.hpp"

namespace gddm {

GradientField forward_gradient(const Field& x) {
  if (x.empty()) throw DimensionError("forward_gradient of empty field");
  const std::size_t h = x.height(), w = x.width(), nc = x.channels();
  GradientField g{Field(x.shape()), Field(x.shape())};
  for (std::size_t u = 0; u < h; ++u) {
    for (std::size_t v = 0; v < w; ++v) {
      for (std::size_t c = 0; c < nc; ++c) {
        const double here = x(u, v, c);
        g.gu(u, v, c) = (u + 1 < h) ? x(u + 1, v, c) - here : 0.0;
        g.gv(u, v, c) = (v + 1 < w) ? x(u, v + 1, c) - here : 0.0;
      }
    }
  }
  return g;
}

Field divergence_adjoint(const GradientField& g) {
  require_same_shape(g.gu, g.gv, "divergence_adjoint");
  if (g.gu.empty()) throw DimensionError("divergence_adjoint of empty field");
  const std::size_t h = g.gu.height(), w = g.gu.width(), nc = g.gu.channels();
  Field out(g.gu.shape());
  for (std::size_t u = 0; u < h; ++u) {
    for (std::size_t v = 0; v < w; ++v) {
      for (std::size_t c = 0; c < nc; ++c) {
        double s = 0.0;
        if (u + 1 < h) s -= g.gu(u, v, c);
        if (u > 0) s += g.gu(u - 1, v, c);
        if (v + 1 < w) s -= g.gv(u, v, c);
        if (v > 0) s += g.gv(u, v - 1, c);
        out(u, v, c) = s;
      }
    }
  }
  return out;
}

Field laplacian_fe(const Field& x) {
  if (x.empty()) throw DimensionError("laplacian_fe of empty field");
  const std::size_t h = x.height(), w = x.width(), nc = x.channels();
  Field out(x.shape());
  for (std::size_t u = 0; u < h; ++u) {
    const std::size_t up = u > 0 ? u - 1 : u;
    const std::size_t dn = u + 1 < h ? u + 1 : u;
    for (std::size_t v = 0; v < w; ++v) {
      const std::size_t lf = v > 0 ? v - 1 : v;
      const std::size_t rt = v + 1 < w ? v + 1 : v;
      for (std::size_t c = 0; c < nc; ++c) {
        const double here = x(u, v, c);
        // Differences first so a constant field maps to exactly zero.
        out(u, v, c) = 0.25 * ((x(up, v, c) - here) + (x(dn, v, c) - here) + (x(u, lf, c) - here) +
                               (x(u, rt, c) - here));
      }
    }
  }
  return out;
}

Field laplacian_lsq(const Field& x) { return divergence_adjoint(forward_gradient(x)); }

GradientField curl_adjoint(const Field& potential) {
  if (potential.empty()) throw DimensionError("curl_adjoint of empty field");
  const std::size_t h = potential.height(), w = potential.width(), nc = potential.channels();
  GradientField g{Field(potential.shape()), Field(potential.shape())};
  // Each plaquette adds its value around its boundary, counter-clockwise.
  for (std::size_t u = 0; u + 1 < h; ++u) {
    for (std::size_t v = 0; v + 1 < w; ++v) {
      for (std::size_t c = 0; c < nc; ++c) {
        const double psi = potential(u, v, c);
        g.gv(u, v, c) += psi;
        g.gu(u, v + 1, c) += psi;
        g.gv(u + 1, v, c) -= psi;
        g.gu(u, v, c) -= psi;
      }
    }
  }
  return g;
}

Field pack_gradient(const GradientField& g) {
  require_same_shape(g.gu, g.gv, "pack_gradient");
  const std::array<Field, 2> parts{g.gu, g.gv};
  return stack_channels(parts);
}

GradientField unpack_gradient(const Field& packed) {
  if (packed.channels() % 2 != 0) {
    throw ShapeError("unpack_gradient: channel count must be even, got " +
                     std::to_string(packed.channels()));
  }
  const std::size_t nc = packed.channels() / 2;
  const Shape half{packed.height(), packed.width(), nc};
  GradientField g{Field(half), Field(half)};
  for (std::size_t p = 0; p < half.pixels(); ++p) {
    for (std::size_t c = 0; c < nc; ++c) {
      g.gu[p * nc + c] = packed[p * 2 * nc + c];
      g.gv[p * nc + c] = packed[p * 2 * nc + nc + c];
    }
  }
  return g;
}

}  // namespace gddm

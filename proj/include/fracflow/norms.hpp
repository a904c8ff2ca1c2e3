#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "fracflow/common.hpp"
#include "fracflow/fft.hpp"

namespace fracflow {

namespace detail {

/// Iterated tangential differential of a scalar on the unit circle, stored as
/// a word expansion: the order-k tensor is sum_w c_w(theta) w_1 (x) ... (x) w_k
/// with letters w_m in {tau, x}.  Words are orthonormal tensors pointwise, so
/// the Frobenius norm is the l2 norm of the coefficients.  One more
/// derivative appends a tau factor to the theta-derivative of the tensor,
/// and rotating factors (tau' = -x, x' = tau) keeps the family closed.
using TangentTensor = std::map<std::string, std::vector<double>>;

inline TangentTensor tangential_tensor_step(const TangentTensor& cur) {
  TangentTensor next;
  auto add = [&next](const std::string& w, const std::vector<double>& c,
                     double scale) {
    auto& slot = next[w];
    if (slot.empty()) slot.assign(c.size(), 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) slot[i] += scale * c[i];
  };
  for (const auto& [w, c] : cur) {
    add(w + "t", spectral_derivative(c, 1), 1.0);
    for (std::size_t m = 0; m < w.size(); ++m) {
      std::string w2 = w;
      w2[m] = w[m] == 't' ? 'x' : 't';
      add(w2 + "t", c, w[m] == 't' ? -1.0 : 1.0);
    }
  }
  return next;
}

inline TangentTensor tangential_tensor(const std::vector<double>& u,
                                       int order) {
  TangentTensor t{{"t", spectral_derivative(u, 1)}};
  for (int l = 1; l < order; ++l) t = tangential_tensor_step(t);
  return t;
}

inline double frobenius_sup(const TangentTensor& t) {
  if (t.empty()) return 0.0;
  const std::size_t n = t.begin()->second.size();
  double sup = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double q = 0.0;
    for (const auto& [w, c] : t) q += c[i] * c[i];
    sup = std::max(sup, q);
  }
  return std::sqrt(sup);
}

/// Ambient components of the tensor at every node: index I runs over the
/// 2^k multi-indices, bit m of I choosing the ambient coordinate of factor m.
inline std::vector<std::vector<double>> tensor_components(
    const TangentTensor& t, std::size_t n) {
  const std::size_t k = t.empty() ? 0 : t.begin()->first.size();
  std::vector<std::vector<double>> comp(std::size_t{1} << k,
                                        std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double th = two_pi * static_cast<double>(i) / static_cast<double>(n);
    const Vec2 tau = circle_tangent(th), x = circle_point(th);
    for (const auto& [w, c] : t) {
      for (std::size_t I = 0; I < comp.size(); ++I) {
        double factor = 1.0;
        for (std::size_t m = 0; m < k; ++m) {
          const Vec2 v = w[m] == 't' ? tau : x;
          factor *= (I >> m) & 1 ? v.y : v.x;
        }
        comp[I][i] += c[i] * factor;
      }
    }
  }
  return comp;
}

}  // namespace detail

/// Discrete Holder seminorm sup |u(y)-u(x)| / |y-x|^beta over node pairs in
/// the chordal metric; a lower bound of the continuum seminorm.
inline double holder_seminorm(const std::vector<double>& u, double beta) {
  require_grid_size(u.size());
  if (!(beta > 0.0 && beta <= 1.0))
    throw DomainError("holder exponent must lie in (0, 1]");
  const std::size_t n = u.size();
  double sup = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double ti = two_pi * static_cast<double>(i) / static_cast<double>(n);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double tj =
          two_pi * static_cast<double>(j) / static_cast<double>(n);
      sup = std::max(sup, std::abs(u[i] - u[j]) /
                              std::pow(chord_distance(ti, tj), beta));
    }
  }
  return sup;
}

namespace detail {

inline double sup_abs(const std::vector<double>& u) {
  double m = 0.0;
  for (double v : u) m = std::max(m, std::abs(v));
  return m;
}

/// Relative spectral energy above frequency n/4; nonzero content there means
/// the grid no longer resolves the function and derived norms are unreliable.
inline void require_resolved(const std::vector<double>& u) {
  const auto coeff = fourier_coefficients(u);
  const std::size_t n = u.size();
  double total = 0.0, tail = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    const double e = std::norm(coeff[k]);
    total += e;
    if (std::abs(signed_mode(k, n)) > static_cast<int>(n / 4)) tail += e;
  }
  if (total > 0.0 && tail > 1e-8 * total)
    throw ResolutionError("spectral energy above N/4: function is not "
                          "resolved on this grid");
}

}  // namespace detail

/// Discrete C^{k+beta} norm: sum of Frobenius sup-norms of the iterated
/// tangential differentials up to order k, plus the chordal beta-Holder
/// seminorm of the order-k tensor when beta > 0.
inline double ck_beta_norm(const std::vector<double>& u, int k, double beta) {
  require_grid_size(u.size());
  if (k < 0 || k > 6) throw DomainError("derivative order must lie in [0, 6]");
  if (!(beta >= 0.0 && beta < 1.0))
    throw DomainError("holder exponent must lie in [0, 1)");
  detail::require_resolved(u);
  const std::size_t n = u.size();

  double acc = detail::sup_abs(u);
  detail::TangentTensor top;
  for (int l = 1; l <= k; ++l) {
    top = l == 1 ? detail::tangential_tensor(u, 1)
                 : detail::tangential_tensor_step(top);
    acc += detail::frobenius_sup(top);
  }
  if (beta <= 0.0) return acc;

  if (k == 0) return acc + holder_seminorm(u, beta);
  const auto comp = detail::tensor_components(top, n);
  double semi = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double ti = two_pi * static_cast<double>(i) / static_cast<double>(n);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double tj =
          two_pi * static_cast<double>(j) / static_cast<double>(n);
      double q = 0.0;
      for (const auto& c : comp) {
        const double d = c[i] - c[j];
        q += d * d;
      }
      semi = std::max(
          semi, std::sqrt(q) / std::pow(chord_distance(ti, tj), beta));
    }
  }
  return acc + semi;
}

/// Cutoff profile of the dyadic decomposition: 1 on [0,1], 0 on [2,inf),
/// quintic smoothstep in between (C^2 transition keeps block leakage at
/// double-precision roundoff).
inline double paley_eta(double r) {
  if (r <= 1.0) return 1.0;
  if (r >= 2.0) return 0.0;
  const double t = r - 1.0;
  return 1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}

/// Annulus bump delta(r) = eta(r) - eta(2r); the dilates delta(2^{-j} r)
/// telescope to one for every r > 0.
inline double paley_delta(double r) { return paley_eta(r) - paley_eta(2.0 * r); }

/// Frequency-side block filter: keeps the dyadic annulus 2^{j-1} < |m| < 2^{j+1}.
inline std::vector<double> paley_block(const std::vector<double>& u, int j) {
  require_grid_size(u.size());
  auto coeff = fourier_coefficients(u);
  const std::size_t n = u.size();
  const double scale = std::pow(2.0, -j);
  for (std::size_t k = 0; k < n; ++k)
    coeff[k] *= paley_delta(scale * std::abs(signed_mode(k, n)));
  return fourier_synthesis(coeff);
}

/// All nontrivial blocks of a grid function: on an N-point grid the resolved
/// frequencies |m| <= N/2 are covered by j = 0 .. log2(N) - 1.
struct PaleyBlocks {
  int j_min = 0;
  int j_max = 0;
  std::vector<std::vector<double>> blocks;
};

inline PaleyBlocks build_paley_blocks(const std::vector<double>& u) {
  require_grid_size(u.size());
  PaleyBlocks out;
  out.j_min = 0;
  out.j_max = static_cast<int>(std::round(std::log2(u.size()))) - 1;
  for (int j = out.j_min; j <= out.j_max; ++j)
    out.blocks.push_back(paley_block(u, j));
  return out;
}

/// Dyadic characterization of the Holder norm, sup_{j>=1} 2^{j gamma}
/// ||block_j(u)||_inf; equivalent to the C^gamma norm up to fixed constants
/// for non-integer gamma.
inline double fourier_holder_norm(const std::vector<double>& u, double gamma) {
  require_grid_size(u.size());
  if (!(gamma > 0.0 && gamma < 2.0) || gamma == 1.0)
    throw DomainError("gamma must lie in (0, 2) and not be an integer");
  const int j_max = static_cast<int>(std::round(std::log2(u.size()))) - 1;
  double sup = 0.0;
  for (int j = 1; j <= j_max; ++j)
    sup = std::max(sup,
                   std::pow(2.0, j * gamma) * detail::sup_abs(paley_block(u, j)));
  return sup;
}

namespace detail {

inline double cs_norm(const std::vector<double>& u, double s) {
  const int k = static_cast<int>(std::floor(s + 1e-12));
  const double beta = s - k;
  return ck_beta_norm(u, k, beta < 1e-12 ? 0.0 : beta);
}

}  // namespace detail

/// Interpolation-inequality ratio ||u||_{C^s} / (||u||_{C^{s1}}^theta
/// ||u||_{C^{s2}}^{1-theta}) at s = theta s1 + (1-theta) s2; the inequality
/// asserts a uniform upper bound, so the suite checks stability of the ratio.
inline double interpolation_check(const std::vector<double>& u, double s1,
                                  double s2, double theta) {
  if (!(s1 > 0.0) || !(s2 > 0.0))
    throw DomainError("interpolation endpoints must be positive");
  if (!(theta > 0.0 && theta < 1.0))
    throw DomainError("interpolation weight must lie in (0, 1)");
  const double d1 = detail::cs_norm(u, s1);
  const double d2 = detail::cs_norm(u, s2);
  if (d1 == 0.0 || d2 == 0.0)
    throw DegenerateInputError("interpolation ratio of the zero function");
  const double s = theta * s1 + (1.0 - theta) * s2;
  return detail::cs_norm(u, s) /
         (std::pow(d1, theta) * std::pow(d2, 1.0 - theta));
}

/// One row of an emitted norm table.
struct NormRow {
  std::string function_id;
  std::string norm_id;
  double value = 0.0;
  std::size_t n = 0;
};

inline std::string norm_table_csv(const std::vector<NormRow>& rows) {
  std::string out = "function,norm,value,N\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%.17g,%zu\n", r.function_id.c_str(),
                  r.norm_id.c_str(), r.value, r.n);
    out += buf;
  }
  return out;
}

}  // namespace fracflow

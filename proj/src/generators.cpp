#include "pathwise/generators.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>

#include "pathwise/detail/parallel.hpp"
#include "pathwise/detail/rng.hpp"

namespace pathwise {

namespace {

using Rng = std::mt19937_64;

void validate_source(const JumpTimeSource& source) {
  if (const auto* p = std::get_if<PoissonSource>(&source)) {
    if (!(p->rate > 0.0)) throw std::invalid_argument("poisson rate must be positive");
  } else if (const auto* r = std::get_if<RenewalSource>(&source)) {
    if (const auto* e = std::get_if<ExponentialArrival>(&r->arrival)) {
      if (!(e->rate > 0.0)) throw std::invalid_argument("renewal rate must be positive");
    } else if (const auto* u = std::get_if<UniformArrival>(&r->arrival)) {
      if (!(u->lo > 0.0) || !(u->hi > u->lo)) {
        throw std::invalid_argument("uniform inter-arrival needs 0 < lo < hi");
      }
    } else if (const auto* q = std::get_if<RationalArrival>(&r->arrival)) {
      if (q->denominator < 1 || q->max_numerator < 1) {
        throw std::invalid_argument("rational inter-arrival needs positive numerator/denominator");
      }
    }
  } else if (const auto* x = std::get_if<ExplicitTimesSource>(&source)) {
    double prev = 0.0;
    for (double t : x->times) {
      if (!(t > prev)) {
        throw std::invalid_argument("explicit jump times must be strictly increasing and > 0");
      }
      prev = t;
    }
  }
}

void validate_sizes(const JumpSizeDist& sizes) {
  if (const auto* c = std::get_if<ConstantSize>(&sizes)) {
    if (!(c->a > -1.0)) throw std::invalid_argument("jump size a must satisfy a > -1");
  } else if (const auto* u = std::get_if<UniformSize>(&sizes)) {
    if (!(u->lo > -1.0) || !(u->hi > u->lo)) {
      throw std::invalid_argument("jump size interval needs -1 < lo < hi");
    }
  } else if (const auto* d = std::get_if<DiscreteSize>(&sizes)) {
    if (d->values.empty()) throw std::invalid_argument("discrete jump size set is empty");
    for (double a : d->values) {
      if (!(a > -1.0)) throw std::invalid_argument("jump size a must satisfy a > -1");
    }
  }
}

std::vector<double> draw_jump_times(const JumpTimeSource& source, double horizon,
                                    Rng& rng) {
  if (const auto* x = std::get_if<ExplicitTimesSource>(&source)) {
    for (double t : x->times) {
      if (!(t < horizon)) throw std::invalid_argument("explicit jump time outside (0, T)");
    }
    return x->times;
  }
  const auto draw = [&rng, &source]() -> double {
    if (const auto* p = std::get_if<PoissonSource>(&source)) {
      return std::exponential_distribution<double>(p->rate)(rng);
    }
    const auto& arrival = std::get<RenewalSource>(source).arrival;
    if (const auto* e = std::get_if<ExponentialArrival>(&arrival)) {
      return std::exponential_distribution<double>(e->rate)(rng);
    }
    if (const auto* u = std::get_if<UniformArrival>(&arrival)) {
      return std::uniform_real_distribution<double>(u->lo, u->hi)(rng);
    }
    const auto& q = std::get<RationalArrival>(arrival);
    const long k = std::uniform_int_distribution<long>(1, q.max_numerator)(rng);
    return static_cast<double>(k) / static_cast<double>(q.denominator);
  };
  std::vector<double> times;
  double s = draw();
  while (s < horizon) {
    if (s > 0.0) times.push_back(s);
    s += draw();
  }
  return times;
}

double draw_jump_size(const JumpSizeDist& sizes, Rng& rng) {
  if (const auto* c = std::get_if<ConstantSize>(&sizes)) return c->a;
  if (const auto* u = std::get_if<UniformSize>(&sizes)) {
    return std::uniform_real_distribution<double>(u->lo, u->hi)(rng);
  }
  const auto& d = std::get<DiscreteSize>(sizes);
  const std::size_t i =
      std::uniform_int_distribution<std::size_t>(0, d.values.size() - 1)(rng);
  return d.values[i];
}

std::vector<double> brownian_walk(const std::vector<double>& grid, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> z(grid.size(), 0.0);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    z[k] = z[k - 1] + std::sqrt(grid[k] - grid[k - 1]) * gauss(rng);
  }
  return z;
}

// Fractional Gaussian noise by circulant embedding (exact covariance on a
// uniform grid). Returns N increments with Var = dt^{2H}.
std::vector<double> fgn_davies_harte(std::size_t n, double dt, double hurst,
                                     Rng& rng) {
  static std::mutex fftw_mutex;
  const double two_h = 2.0 * hurst;
  const double scale = std::pow(dt, two_h);
  auto gamma = [&](std::size_t k) {
    const double kk = static_cast<double>(k);
    return 0.5 * scale *
           (std::pow(kk + 1.0, two_h) - 2.0 * std::pow(kk, two_h) +
            std::pow(std::abs(kk - 1.0), two_h));
  };

  const std::size_t m = 2 * n;
  std::vector<double> eigenvalues(m);
  {
    std::lock_guard<std::mutex> lock(fftw_mutex);
    fftw_complex* in = fftw_alloc_complex(m);
    fftw_complex* out = fftw_alloc_complex(m);
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t k = j <= n ? j : m - j;
      in[j][0] = gamma(k);
      in[j][1] = 0.0;
    }
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(m), in, out,
                                      FFTW_FORWARD, FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
    for (std::size_t j = 0; j < m; ++j) eigenvalues[j] = out[j][0];
    fftw_free(in);
    fftw_free(out);
  }
  double max_eig = 0.0;
  for (double e : eigenvalues) max_eig = std::max(max_eig, e);
  for (double& e : eigenvalues) {
    if (e < 0.0) {
      if (e < -1e-8 * max_eig) {
        throw std::runtime_error("circulant embedding not nonnegative definite");
      }
      e = 0.0;
    }
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> wr(m), wi(m);
  const double md = static_cast<double>(m);
  wr[0] = std::sqrt(eigenvalues[0] / md) * gauss(rng);
  wi[0] = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    const double s = std::sqrt(eigenvalues[k] / (2.0 * md));
    const double a = gauss(rng), b = gauss(rng);
    wr[k] = s * a;
    wi[k] = s * b;
    wr[m - k] = s * a;
    wi[m - k] = -s * b;
  }
  wr[n] = std::sqrt(eigenvalues[n] / md) * gauss(rng);
  wi[n] = 0.0;

  std::vector<double> fgn(n);
  {
    std::lock_guard<std::mutex> lock(fftw_mutex);
    fftw_complex* in = fftw_alloc_complex(m);
    fftw_complex* out = fftw_alloc_complex(m);
    for (std::size_t j = 0; j < m; ++j) {
      in[j][0] = wr[j];
      in[j][1] = wi[j];
    }
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(m), in, out,
                                      FFTW_FORWARD, FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
    for (std::size_t j = 0; j < n; ++j) fgn[j] = out[j][0];
    fftw_free(in);
    fftw_free(out);
  }
  return fgn;
}

double reflect_into(double v, double bound) {
  if (bound <= 0.0) return std::abs(v);
  const double period = 2.0 * bound;
  double r = std::fmod(v, period);
  if (r < 0.0) r += period;
  return bound - std::abs(r - bound);
}

std::vector<double> continuous_component(const ContinuousGenerator& gen,
                                         const std::vector<double>& grid,
                                         Rng& rng) {
  if (std::holds_alternative<BrownianGen>(gen)) {
    return brownian_walk(grid, rng);
  }
  if (const auto* f = std::get_if<BrownianPlusFbmGen>(&gen)) {
    std::vector<double> z = brownian_walk(grid, rng);
    const std::size_t n = grid.size() - 1;
    const double dt = grid.back() / static_cast<double>(n);
    const std::vector<double> fgn = fgn_davies_harte(n, dt, f->hurst, rng);
    double acc = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
      acc += fgn[k - 1];
      z[k] += acc;
    }
    return z;
  }
  const auto& r = std::get<BrownianPlusReflectedGen>(gen);
  std::vector<double> w = brownian_walk(grid, rng);
  const std::vector<double> b = brownian_walk(grid, rng);
  const double cw = r.rho;
  const double cr = std::sqrt(1.0 - r.rho * r.rho);
  for (std::size_t k = 0; k < w.size(); ++k) {
    w[k] = cw * w[k] + cr * reflect_into(b[k], r.bound);
  }
  return w;
}

Trajectory generate_on_grid(const ClassSpec& spec, std::vector<double> grid,
                            std::uint64_t seed) {
  validate(spec);
  Rng rng(seed);
  if (const auto* c = std::get_if<ContinuousQVSpec>(&spec.model)) {
    std::vector<double> z = continuous_component(c->generator, grid, rng);
    return Trajectory(spec.x0, 0.0, c->sigma, std::move(grid), std::move(z), {});
  }
  if (const auto* g = std::get_if<GeometricPoissonSpec>(&spec.model)) {
    const std::vector<double> times = draw_jump_times(g->source, spec.horizon, rng);
    std::vector<Jump> jumps;
    jumps.reserve(times.size());
    for (double s : times) jumps.push_back({s, 1.0 + g->a});
    std::vector<double> z(grid.size(), 0.0);
    return Trajectory(spec.x0, g->mu, 0.0, std::move(grid), std::move(z),
                      std::move(jumps));
  }
  const auto& jd = std::get<JumpDiffusionSpec>(spec.model);
  const std::vector<double> times = draw_jump_times(jd.source, spec.horizon, rng);
  std::vector<Jump> jumps;
  jumps.reserve(times.size());
  for (double s : times) jumps.push_back({s, 1.0 + draw_jump_size(jd.sizes, rng)});
  std::vector<double> z = brownian_walk(grid, rng);
  const double drift = jd.mu - 0.5 * jd.sigma * jd.sigma;
  return Trajectory(spec.x0, drift, jd.sigma, std::move(grid), std::move(z),
                    std::move(jumps));
}

}  // namespace

void validate(const ClassSpec& spec) {
  if (!(spec.horizon > 0.0)) throw std::invalid_argument("class horizon must be positive");
  if (!(spec.x0 > 0.0)) throw std::invalid_argument("class x0 must be positive");
  if (const auto* c = std::get_if<ContinuousQVSpec>(&spec.model)) {
    if (!(c->sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
    if (const auto* f = std::get_if<BrownianPlusFbmGen>(&c->generator)) {
      // H <= 1/2 would carry nonzero quadratic variation of its own.
      if (!(f->hurst > 0.5) || !(f->hurst < 1.0)) {
        throw std::invalid_argument("fbm hurst index must lie in (1/2, 1)");
      }
    } else if (const auto* r = std::get_if<BrownianPlusReflectedGen>(&c->generator)) {
      if (!(r->rho > 0.0) || !(r->rho < 1.0)) {
        throw std::invalid_argument("reflected mix rho must lie in (0, 1)");
      }
      if (r->bound < 0.0) throw std::invalid_argument("reflection bound must be >= 0");
    }
  } else if (const auto* g = std::get_if<GeometricPoissonSpec>(&spec.model)) {
    if (!(g->a > -1.0)) throw std::invalid_argument("jump size a must satisfy a > -1");
    validate_source(g->source);
  } else {
    const auto& jd = std::get<JumpDiffusionSpec>(spec.model);
    if (!(jd.sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
    validate_sizes(jd.sizes);
    validate_source(jd.source);
  }
}

Trajectory generate_trajectory(const ClassSpec& spec,
                               const PartitionSequence& partition,
                               std::uint64_t seed) {
  if (partition.horizon() != spec.horizon) {
    throw std::invalid_argument("partition horizon differs from class horizon");
  }
  return generate_on_grid(spec, partition.grid(partition.max_level()), seed);
}

Trajectory generate_trajectory(const ClassSpec& spec, int grid_level,
                               std::uint64_t seed) {
  const PartitionSequence p(spec.horizon, PartitionRule::dyadic, grid_level);
  return generate_on_grid(spec, p.grid(grid_level), seed);
}

std::vector<Trajectory> generate_bundle(const ClassSpec& spec,
                                        const PartitionSequence& partition,
                                        std::uint64_t base_seed,
                                        std::size_t count, int threads) {
  std::vector<std::optional<Trajectory>> slots(count);
  detail::parallel_for(count, threads, [&](std::size_t i) {
    slots[i] = generate_trajectory(spec, partition, detail::derive_seed(base_seed, i));
  });
  std::vector<Trajectory> bundle;
  bundle.reserve(count);
  for (auto& s : slots) bundle.push_back(std::move(*s));
  return bundle;
}

Trajectory make_geometric_poisson_path(double x0, double mu, double a,
                                       const std::vector<double>& jump_times,
                                       double horizon, std::size_t grid_cells) {
  if (grid_cells < 1) throw std::invalid_argument("grid_cells must be >= 1");
  std::vector<double> grid(grid_cells + 1);
  for (std::size_t k = 0; k <= grid_cells; ++k) {
    grid[k] = horizon * (static_cast<double>(k) / static_cast<double>(grid_cells));
  }
  grid.back() = horizon;
  std::vector<Jump> jumps;
  jumps.reserve(jump_times.size());
  for (double s : jump_times) jumps.push_back({s, 1.0 + a});
  return Trajectory(x0, mu, 0.0, std::move(grid),
                    std::vector<double>(grid_cells + 1, 0.0), std::move(jumps));
}

}  // namespace pathwise

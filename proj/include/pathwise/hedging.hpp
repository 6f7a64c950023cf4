#pragma once

#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "pathwise/partitions.hpp"
#include "pathwise/portfolio.hpp"
#include "pathwise/trajectory.hpp"

namespace pathwise {

struct CallPayoff {
  double strike;
};
struct PutPayoff {
  double strike;
};
// Piecewise-linear table on [xs.front(), xs.back()], extended linearly with
// the end slopes; `lipschitz` is the declared constant.
struct TabulatedPayoff {
  std::vector<double> xs;
  std::vector<double> hs;
  double lipschitz;
};
using Payoff = std::variant<CallPayoff, PutPayoff, TabulatedPayoff>;

double payoff_value(const Payoff& h, double x);
double payoff_lipschitz(const Payoff& h);

struct PdeGridSpec {
  int space_cells = 800;
  int time_steps = 800;
  // Log-price bounds; NaN means auto: centered on log(center) with
  // half-width max(6 sigma sqrt(T), |log(strike/center)| + sigma sqrt(T)).
  double log_lo = std::numeric_limits<double>::quiet_NaN();
  double log_hi = std::numeric_limits<double>::quiet_NaN();
  double center = 100.0;
};

// Crank-Nicolson solution of  v_t + r x v_x + sigma^2 x^2 / 2 v_xx - r v = 0
// in log-price, Rannacher start-up, Dirichlet far-field boundaries matching
// the payoff asymptotics. Terminal row is the exact payoff.
struct ValueSurface {
  std::vector<double> times;
  std::vector<double> log_space;
  std::vector<std::vector<double>> values;  // [time][space]
  std::vector<std::vector<double>> delta;   // dv/dx via centered differences
  double sigma = 0.0;
  double rate = 0.0;
  double horizon = 0.0;
  std::vector<std::string> warnings;

  double value(double t, double x) const;   // bilinear in (t, log x)
  double delta_at(double t, double x) const;
};

ValueSurface solve_bs_pde(const Payoff& h, double sigma, double rate,
                          double horizon, const PdeGridSpec& grid);

// Truncated replication value of the geometric Poisson hedge,
//   F(t, s) = e^{-lambda tau} sum_{k<=K} h(s e^{mu tau} (1+a)^k) (lambda tau)^k / k!
// with lambda = -mu/a, tau = T - t, plus a Lipschitz tail bound for the
// dropped terms.
struct TildeF {
  double value = 0.0;
  double tail_bound = 0.0;
};
TildeF tilde_F(double t, double s, const Payoff& h, double mu, double a,
               double horizon, int k_trunc);

// Delta hedge (v - dv/dx x, dv/dx) with V0 = v(0, x0), floor 0 for
// non-negative payoffs.
Portfolio build_bs_hedge(const ValueSurface& surface, double x0);

// Series hedge phi_t = (F(t,(1+a)x(t-)) - F(t,x(t-))) / (a x(t-)) with
// V0 = F(0, x0); requires a mu < 0 and uses rate 0.
Portfolio build_poisson_hedge(const Payoff& h, double mu, double a,
                              double horizon, int k_trunc, double x0);

struct HedgeReport {
  struct Row {
    int level;
    std::size_t path_id;
    double terminal_value;
    double payoff;
    double abs_error;
  };
  struct LevelSummary {
    int level;
    double median_error;
    double max_error;
    bool improved;  // median below the previous level's
  };
  std::vector<Row> rows;
  std::vector<LevelSummary> summary;
  double estimated_order = 0.0;  // log-ratio of successive median errors
  std::vector<std::string> warnings;
};

// Rolls the portfolio out on every (path, level) pair and tabulates
// |V(T) - h(x(T))| against the exact trajectory terminal value.
HedgeReport replicate(const Portfolio& phi, const std::vector<Trajectory>& bundle,
                      const Payoff& h, const PartitionSequence& p,
                      const std::vector<int>& levels, int threads = 1);

}  // namespace pathwise

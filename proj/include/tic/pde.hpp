#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tic/grids.hpp"
#include "tic/model.hpp"

namespace tic {

enum class Scheme { explicit_euler, implicit_diffusion };

std::string scheme_name(Scheme s);
Scheme parse_scheme(const std::string& name);

struct PdeConfig {
    double tau = 0.0;  // left end of the time grid
    int time_steps = 200;
    SpatialGrid space{-4.0, 4.0, 201};
    Scheme scheme = Scheme::explicit_euler;
    double cfl_safety = 1.0;
    double tolerance = 1e-9;  // used for the degeneracy and self-consistency checks
    int workers = 1;
    std::ostream* log = nullptr;  // layer,max_update,min_theta,max_theta when set

    std::vector<double> time_grid(double horizon) const;
};

// Which value fills the generator's y slot when advancing row t at layer s.
enum class YSlot {
    lagged_diagonal,  // Theta(s, s, x) (lagged one step)
    own_row           // Theta(t, s, x): the comparison variant
};

struct EquilibriumSolution {
    ThetaField theta;
    ScalarField value;
    FeedbackStrategy strategy;
    std::string regime;  // "sigma-control-free", "sigma-control-dependent" or "own-y-variant"
    long truncated_nodes = 0;
};

EquilibriumSolution solve_equilibrium_hjb(const ProblemSpec& spec, const PdeConfig& cfg);
EquilibriumSolution solve_equilibrium_hjb_variant(const ProblemSpec& spec, const PdeConfig& cfg);

// Theta on the sub-triangle of the strategy's time grid starting at index
// `window_start`. `diagonal_source`, when given, is indexed on the full grid
// and row j holds the diagonal value used by step j (see lagged_diagonal);
// otherwise the diagonal is generated by the solve itself.
ThetaField solve_representation_pde(const ProblemSpec& spec, const FeedbackStrategy& psi,
                                    int window_start, const ScalarField* diagonal_source,
                                    const PdeConfig& cfg);

// Theta~(tau, s, x) for s in the window; rows are local to the window.
ScalarField solve_frozen_pde(const ProblemSpec& spec, const FeedbackStrategy& psi, int window_start,
                             double outer_time, const ScalarField& diagonal_source,
                             const PdeConfig& cfg);

struct ClassicalSolution {
    ScalarField value;          // rows a..b of the time grid (local indices)
    FeedbackStrategy feedback;  // steps a..b-1 (local indices)
    long truncated_nodes = 0;
};

// HJB with fixed outer time on time-grid indices [a, b]; `terminal` has the
// spatial grid's node count.
ClassicalSolution solve_classical_hjb(const ProblemSpec& spec, const std::vector<double>& times, int a,
                                      int b, std::span<const double> terminal, double outer_time,
                                      const PdeConfig& cfg);

// Lower-level pieces shared with the partition construction.
namespace pde_detail {

// next = prev + ds (a/2 D2 prev + e), diffusion explicit or implicit
void layer_update(std::span<const double> prev, std::span<double> next, std::span<const double> a,
                  std::span<const double> e, double ds, double dx, Scheme scheme, double cfl_safety,
                  int layer);

void set_terminal_rows(const ProblemSpec& spec, ThetaField& theta, int row_lo, int row_hi);

// Advance rows [row_lo, row_hi) from layer N down to their diagonal with the
// fixed strategy. Rows >= row_hi must already be present when the diagonal
// is self-generated.
void march_rows(const ProblemSpec& spec, const FeedbackStrategy& psi, ThetaField& theta, int row_lo,
                int row_hi, const ScalarField* diagonal_source, const PdeConfig& cfg);

}  // namespace pde_detail

// max over rows, layers and nodes of |Theta[i][j][k] - Theta[i'][j][k]|
double row_spread(const ThetaField& theta);

}  // namespace tic

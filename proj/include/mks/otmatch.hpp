#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "mks/boxgeom.hpp"
#include "mks/matrix.hpp"
#include "mks/siou.hpp"

namespace mks {

/// Stand-in for an inadmissible (+inf) pairing. Entries at or above this
/// value must carry no mass in an optimal plan.
inline constexpr double kInfiniteCost = 1e6;

/// Discrete Kantorovich problem: n x m cost with source/target measures.
struct OTProblem {
    Matrix cost;
    std::vector<double> mu;
    std::vector<double> nu;

    static OTProblem uniform(Matrix cost);

    /// Throws std::invalid_argument on shape mismatch, negative or
    /// non-normalized measures, or non-finite costs.
    void validate() const;

    std::size_t rows() const noexcept { return cost.rows(); }
    std::size_t cols() const noexcept { return cost.cols(); }
};

struct TransportPlan {
    Matrix plan;
    double objective = 0.0;          // <cost, plan>
    double marginal_violation = 0.0; // max |row sum - mu|, |col sum - nu|
};

double plan_objective(const Matrix& cost, const Matrix& plan);
double marginal_violation(const Matrix& plan, std::span<const double> mu, std::span<const double> nu);

struct SinkhornConfig {
    double epsilon = 1e-3;
    int max_iters = 1000;
    double tol = 1e-9;
    /// Anneal epsilon from 1 down to `epsilon` (halving), warm-starting the
    /// potentials. Applies to the normalized cost scale.
    bool epsilon_scaling = true;
};

struct SinkhornResult {
    TransportPlan transport;
    bool converged = false;
    int iterations = 0;       // at the target epsilon
    int total_iterations = 0; // including annealing stages
    double cost_scale = 1.0;  // costs were divided by this before exponentiation
};

/// Log-domain Sinkhorn-Knopp for the entropic Kantorovich problem.
/// Non-convergence is reported, never thrown.
SinkhornResult sinkhorn(const OTProblem& problem, const SinkhornConfig& cfg = {});

inline constexpr std::size_t kExactKpMaxSize = 64;

/// Exact Kantorovich optimum by successive shortest augmenting paths on the
/// transportation network. Throws std::length_error above kExactKpMaxSize.
TransportPlan exact_kp(const OTProblem& problem);

struct Assignment {
    std::vector<std::pair<std::size_t, std::size_t>> pairs; // (prediction, ground truth), sorted
    std::vector<std::size_t> unmatched_predictions;
    std::vector<std::size_t> unmatched_ground_truths;
    double total_cost = 0.0; // sum of selected costs
};

struct MongeSolution {
    Assignment assignment;
    double objective = 0.0; // mean of selected costs (uniform weights)
};

inline constexpr std::size_t kBruteForceMaxSize = 8;

/// Minimum-cost bijection. Requires a square problem with uniform measures
/// (otherwise no Monge map exists: std::domain_error). Permutation
/// enumeration up to kBruteForceMaxSize, Hungarian beyond.
MongeSolution exact_mp(const OTProblem& problem);

/// O(n^3) shortest-augmenting-path Hungarian method on a rectangular cost
/// with rows <= cols. Returns the column chosen for each row.
std::vector<std::size_t> hungarian(const Matrix& cost);

/// Greedy rounding: entries by descending mass, ties by (row, col); an entry
/// is taken when both its row and column are still free.
Assignment round_plan(const Matrix& plan, const Matrix& cost);

/// MP / KP with the equal-optima convention (0/0 -> 1).
double mp_kp_ratio(double mp_value, double kp_value);

/// (MP)/(KP) - IoU(p, g).
double negative_iou(const AABox& p, const AABox& g, double mp_value, double kp_value);

struct CostAssignment {
    Assignment assignment;
    SinkhornResult solver; // on the square (padded) problem
};

/// Sinkhorn on `cost` followed by greedy rounding. Unequal sizes are padded
/// to a square with zero-cost dummy rows or columns, so the result is an
/// injection from the smaller side; pairs touching a dummy are dropped.
CostAssignment sinkhorn_assign(const Matrix& cost, const SinkhornConfig& cfg = {});

enum class MatchCost { NegativeIoU, Siou };

/// cost[i][j] = 1 - IoU(preds[i], gts[j]) (or the additive SIoU loss);
/// uniform measures.
OTProblem build_cost_matrix(std::span<const AABox> preds, std::span<const AABox> gts,
                            MatchCost kind = MatchCost::NegativeIoU, ShapeExponent theta = {});

enum class RatioMode {
    Collapsed, // MP/KP := 1, negative IoU = 1 - IoU
    Exact,     // solve MP and KP on square problems; rectangular falls back to 1
};

struct MatchConfig {
    SinkhornConfig sinkhorn{};
    MatchCost cost = MatchCost::NegativeIoU;
    RatioMode ratio = RatioMode::Collapsed;
    ShapeExponent theta{};
};

struct MatchResult {
    Assignment assignment;           // costs from the unpadded cost matrix
    std::vector<LossBreakdown> losses; // one per assignment pair
    SinkhornResult solver;           // on the square (padded) problem
    bool monge_feasible = false;     // square problem
    double ratio = 1.0;              // MP/KP used for the negative IoU
};

/// Sinkhorn matching of predictions to ground truths via sinkhorn_assign.
MatchResult match(std::span<const AABox> preds, std::span<const AABox> gts, const MatchConfig& cfg = {});

} // namespace mks

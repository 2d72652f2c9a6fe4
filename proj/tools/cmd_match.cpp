#include <algorithm>
#include <numeric>
#include <random>

#include "commands.hpp"
#include "mks/otmatch.hpp"
#include "mks/records_io.hpp"

namespace mks::cli {
namespace {

struct SolverOptions {
    double epsilon = SinkhornConfig{}.epsilon;
    int iters = SinkhornConfig{}.max_iters;
    double tol = SinkhornConfig{}.tol;
    bool no_scaling = false;

    SinkhornConfig config() const {
        SinkhornConfig c;
        c.epsilon = epsilon;
        c.max_iters = iters;
        c.tol = tol;
        c.epsilon_scaling = !no_scaling;
        return c;
    }
    void echo(Json& cfg) const {
        cfg["epsilon"] = epsilon;
        cfg["iters"] = iters;
        cfg["tol"] = tol;
        cfg["epsilon_scaling"] = !no_scaling;
    }
};

void add_solver(CLI::App& sub, SolverOptions& s) {
    sub.add_option("--epsilon", s.epsilon, "Entropic regularization (normalized cost scale)")->capture_default_str();
    sub.add_option("--iters", s.iters, "Sinkhorn iterations at the target epsilon")->capture_default_str();
    sub.add_option("--tol", s.tol, "Marginal violation tolerance")->capture_default_str();
    sub.add_flag("--no-scaling", s.no_scaling, "Run at the target epsilon directly");
}

Json index_list(const std::vector<std::size_t>& v) { return Json(v); }

struct MatchOptions {
    CommonOptions common;
    SolverOptions solver;
    std::string preds, gts;
    std::string cost = "niou";
    std::string ratio = "collapsed";
    double theta = ShapeExponent::kDefault;
};

int run_match(const MatchOptions& o) {
    const auto preds = read_boxes(o.preds);
    const auto gts = read_boxes(o.gts);
    MatchConfig mc;
    mc.sinkhorn = o.solver.config();
    mc.cost = o.cost == "siou" ? MatchCost::Siou : MatchCost::NegativeIoU;
    mc.ratio = o.ratio == "exact" ? RatioMode::Exact : RatioMode::Collapsed;
    mc.theta = ShapeExponent(o.theta);

    Json cfg = {{"preds", path_echo(o.preds)}, {"gts", path_echo(o.gts)}, {"cost", o.cost}, {"ratio", o.ratio},
                {"theta", o.theta}};
    o.solver.echo(cfg);
    Report rep("match", cfg);
    rep.set_columns({"pred", "gt", "cost", "iou", "negative_iou", "angle", "distance", "shape", "loss"});

    const MatchResult r = match(preds, gts, mc);
    const OTProblem base = build_cost_matrix(preds, gts, mc.cost, mc.theta);
    for (std::size_t k = 0; k < r.assignment.pairs.size(); ++k) {
        const auto [i, j] = r.assignment.pairs[k];
        const LossBreakdown& lb = r.losses[k];
        rep.add_row({i, j, real(base.cost(i, j)), real(lb.iou), real(lb.negative_iou), real(lb.angle_cost),
                     real(lb.distance_cost), real(lb.shape_cost), real(lb.total)});
    }
    rep.summary() = {{"predictions", preds.size()},
                     {"ground_truths", gts.size()},
                     {"matched", r.assignment.pairs.size()},
                     {"unmatched_predictions", index_list(r.assignment.unmatched_predictions)},
                     {"unmatched_ground_truths", index_list(r.assignment.unmatched_ground_truths)},
                     {"total_cost", real(r.assignment.total_cost)},
                     {"converged", r.solver.converged},
                     {"iterations", r.solver.iterations},
                     {"total_iterations", r.solver.total_iterations},
                     {"marginal_violation", real(r.solver.transport.marginal_violation)},
                     {"monge_feasible", r.monge_feasible},
                     {"ratio", real(r.ratio)}};
    rep.write(o.common.format, o.common.out);
    return 0;
}

/// Minimum-cost injection from the smaller side by enumeration.
double brute_force_injection(const Matrix& cost) {
    const bool transpose = cost.rows() > cost.cols();
    const std::size_t k = std::min(cost.rows(), cost.cols());
    const std::size_t big = std::max(cost.rows(), cost.cols());
    if (big > kBruteForceMaxSize)
        throw std::length_error("brute-force oracle is capped at " + std::to_string(kBruteForceMaxSize) +
                                " boxes per side");
    std::vector<std::size_t> perm(big);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double c = 0.0;
        for (std::size_t i = 0; i < k; ++i) c += transpose ? cost(perm[i], i) : cost(i, perm[i]);
        best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

struct VerifyOptions {
    CommonOptions common;
    SolverOptions solver;
    std::string preds, gts;
    std::size_t random = 0;
    std::size_t min_size = 2, max_size = kBruteForceMaxSize;
    bool rectangular = false;
};

int run_match_verify(const VerifyOptions& o) {
    if (o.random == 0 && (o.preds.empty() || o.gts.empty()))
        throw CLI::ValidationError("match-verify", "give --preds and --gts, or --random N");
    if (o.min_size < 1 || o.min_size > o.max_size || o.max_size > kBruteForceMaxSize)
        throw CLI::ValidationError("--min-size/--max-size", "need 1 <= min <= max <= 8");

    std::vector<Matrix> instances;
    if (o.random > 0) {
        std::mt19937_64 rng(o.common.seed);
        std::uniform_int_distribution<std::size_t> side(o.min_size, o.max_size);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (std::size_t t = 0; t < o.random; ++t) {
            const std::size_t n = side(rng);
            const std::size_t m = o.rectangular ? side(rng) : n;
            Matrix c(n, m);
            for (double& v : c.data()) v = unit(rng);
            instances.push_back(std::move(c));
        }
    } else {
        instances.push_back(build_cost_matrix(read_boxes(o.preds), read_boxes(o.gts)).cost);
    }

    Json cfg = Json::object();
    if (o.random > 0) {
        cfg = {{"random", o.random}, {"min_size", o.min_size}, {"max_size", o.max_size},
               {"rectangular", o.rectangular}, {"seed", o.common.seed}};
    } else {
        cfg = {{"preds", path_echo(o.preds)}, {"gts", path_echo(o.gts)}};
    }
    o.solver.echo(cfg);
    Report rep("match-verify", cfg);
    rep.set_columns({"instance", "n", "m", "sinkhorn_cost", "oracle_cost", "gap", "pass", "converged", "unmatched",
                     "mp", "kp", "ratio"});

    std::size_t failures = 0, unconverged = 0;
    double worst_gap = 0.0;
    for (std::size_t t = 0; t < instances.size(); ++t) {
        const Matrix& c = instances[t];
        const std::size_t n = c.rows(), m = c.cols();
        const CostAssignment sa = sinkhorn_assign(c, o.solver.config());
        const double oracle = brute_force_injection(c);
        const double gap = sa.assignment.total_cost - oracle;
        const bool pass = std::abs(gap) <= 1e-6 * static_cast<double>(std::max(n, m));
        failures += pass ? 0 : 1;
        unconverged += sa.solver.converged ? 0 : 1;
        worst_gap = std::max(worst_gap, std::abs(gap));
        Json mp = nullptr, kp = nullptr, ratio = nullptr;
        if (n == m) {
            const OTProblem prob = OTProblem::uniform(c);
            const double mpv = exact_mp(prob).objective;
            const double kpv = exact_kp(prob).objective;
            mp = real(mpv);
            kp = real(kpv);
            ratio = real(mp_kp_ratio(mpv, kpv));
        }
        const std::size_t unmatched =
            sa.assignment.unmatched_predictions.size() + sa.assignment.unmatched_ground_truths.size();
        rep.add_row({t, n, m, real(sa.assignment.total_cost), real(oracle), real(gap), pass, sa.solver.converged,
                     unmatched, mp, kp, ratio});
    }
    rep.summary() = {{"instances", instances.size()}, {"failures", failures},
                     {"unconverged", unconverged},    {"max_abs_gap", real(worst_gap)},
                     {"passed", failures == 0}};
    rep.write(o.common.format, o.common.out);
    return failures == 0 ? 0 : kExitCheckFailed;
}

} // namespace

void register_match_commands(CLI::App& app, const ExitCode& code) {
    auto mo = std::make_shared<MatchOptions>();
    auto* sub = app.add_subcommand("match", "Sinkhorn matching of predicted to ground-truth boxes");
    sub->add_option("--preds", mo->preds, "Prediction boxes: cx cy w h")->required();
    sub->add_option("--gts", mo->gts, "Ground-truth boxes: cx cy w h")->required();
    sub->add_option("--cost", mo->cost, "Matching cost")->check(CLI::IsMember({"niou", "siou"}))->capture_default_str();
    sub->add_option("--ratio", mo->ratio, "MP/KP handling")->check(CLI::IsMember({"collapsed", "exact"}))
        ->capture_default_str();
    sub->add_option("--theta", mo->theta, "Shape-cost exponent")->capture_default_str();
    add_solver(*sub, mo->solver);
    add_common(*sub, mo->common, false);
    sub->callback([mo, code] { *code = run_match(*mo); });

    auto vo = std::make_shared<VerifyOptions>();
    sub = app.add_subcommand("match-verify", "Rounded Sinkhorn assignments against a brute-force optimum");
    sub->add_option("--preds", vo->preds, "Prediction boxes: cx cy w h");
    sub->add_option("--gts", vo->gts, "Ground-truth boxes: cx cy w h");
    sub->add_option("--random", vo->random, "Number of random uniform-cost instances");
    sub->add_option("--min-size", vo->min_size, "Smallest side of random instances")->capture_default_str();
    sub->add_option("--max-size", vo->max_size, "Largest side of random instances")->capture_default_str();
    sub->add_flag("--rectangular", vo->rectangular, "Draw both sides of random instances independently");
    add_solver(*sub, vo->solver);
    add_common(*sub, vo->common);
    sub->callback([vo, code] { *code = run_match_verify(*vo); });
}

} // namespace mks::cli

#include "mks/otmatch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace mks {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kMeasureTol = 1e-9;

bool is_uniform(std::span<const double> w) {
    const double u = 1.0 / static_cast<double>(w.size());
    return std::all_of(w.begin(), w.end(), [u](double x) { return std::abs(x - u) <= 1e-12; });
}

// Log-sum-exp over a strided view; -inf entries contribute nothing.
template <class Fn>
double logsumexp(std::size_t count, Fn&& term) {
    double hi = kNegInf;
    for (std::size_t k = 0; k < count; ++k) hi = std::max(hi, term(k));
    if (hi == kNegInf) return kNegInf;
    double acc = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
        const double t = term(k);
        if (t != kNegInf) acc += std::exp(t - hi);
    }
    return hi + std::log(acc);
}

} // namespace

OTProblem OTProblem::uniform(Matrix cost) {
    OTProblem p;
    p.mu.assign(cost.rows(), cost.rows() ? 1.0 / static_cast<double>(cost.rows()) : 0.0);
    p.nu.assign(cost.cols(), cost.cols() ? 1.0 / static_cast<double>(cost.cols()) : 0.0);
    p.cost = std::move(cost);
    return p;
}

void OTProblem::validate() const {
    if (cost.rows() == 0 || cost.cols() == 0) throw std::invalid_argument("OTProblem: empty cost matrix");
    if (mu.size() != cost.rows() || nu.size() != cost.cols())
        throw std::invalid_argument("OTProblem: measure sizes do not match the cost shape");
    for (double c : cost.data())
        if (!std::isfinite(c)) throw std::invalid_argument("OTProblem: non-finite cost entry");
    for (const auto* measure : {&mu, &nu}) {
        double s = 0.0;
        for (double w : *measure) {
            if (!(w >= 0.0)) throw std::invalid_argument("OTProblem: negative measure weight");
            s += w;
        }
        if (std::abs(s - 1.0) > kMeasureTol) throw std::invalid_argument("OTProblem: measure does not sum to 1");
    }
}

double plan_objective(const Matrix& cost, const Matrix& plan) {
    double acc = 0.0;
    for (std::size_t i = 0; i < cost.rows(); ++i)
        for (std::size_t j = 0; j < cost.cols(); ++j) acc += cost(i, j) * plan(i, j);
    return acc;
}

double marginal_violation(const Matrix& plan, std::span<const double> mu, std::span<const double> nu) {
    double worst = 0.0;
    for (std::size_t i = 0; i < plan.rows(); ++i) {
        double s = 0.0;
        for (double v : plan.row(i)) s += v;
        worst = std::max(worst, std::abs(s - mu[i]));
    }
    for (std::size_t j = 0; j < plan.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < plan.rows(); ++i) s += plan(i, j);
        worst = std::max(worst, std::abs(s - nu[j]));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Sinkhorn

SinkhornResult sinkhorn(const OTProblem& problem, const SinkhornConfig& cfg) {
    problem.validate();
    if (!(cfg.epsilon > 0.0)) throw std::invalid_argument("sinkhorn: epsilon must be positive");
    if (cfg.max_iters < 1) throw std::invalid_argument("sinkhorn: max_iters must be >= 1");

    const std::size_t n = problem.rows();
    const std::size_t m = problem.cols();
    SinkhornResult res;

    // Normalize admissible costs to [0, 1]; inadmissible entries stay at the sentinel.
    double lo = std::numeric_limits<double>::infinity();
    double hi = kNegInf;
    for (double c : problem.cost.data()) {
        if (c >= kInfiniteCost) continue;
        lo = std::min(lo, c);
        hi = std::max(hi, c);
    }
    Matrix cost(n, m);
    if (hi == kNegInf) {
        cost = Matrix(n, m, kInfiniteCost);
    } else {
        const double shift = std::min(lo, 0.0);
        res.cost_scale = std::max(1.0, hi - shift);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                const double c = problem.cost(i, j);
                cost(i, j) = c >= kInfiniteCost ? kInfiniteCost : (c - shift) / res.cost_scale;
            }
    }

    auto& tp = res.transport;
    tp.plan = Matrix(n, m);

    // A constant cost admits only the independent coupling.
    const auto data = cost.data();
    if (std::all_of(data.begin(), data.end(), [&](double c) { return c == data[0]; })) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) tp.plan(i, j) = problem.mu[i] * problem.nu[j];
        tp.objective = plan_objective(problem.cost, tp.plan);
        tp.marginal_violation = marginal_violation(tp.plan, problem.mu, problem.nu);
        res.converged = true;
        return res;
    }

    std::vector<double> log_mu(n), log_nu(m);
    for (std::size_t i = 0; i < n; ++i) log_mu[i] = problem.mu[i] > 0.0 ? std::log(problem.mu[i]) : kNegInf;
    for (std::size_t j = 0; j < m; ++j) log_nu[j] = problem.nu[j] > 0.0 ? std::log(problem.nu[j]) : kNegInf;

    std::vector<double> f(n, 0.0), g(m, 0.0);

    auto build_plan = [&](double eps) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                const double e = (f[i] + g[j] - cost(i, j)) / eps;
                tp.plan(i, j) = std::exp(e);
            }
    };
    auto iterate = [&](double eps) {
        for (std::size_t i = 0; i < n; ++i) {
            if (log_mu[i] == kNegInf) { f[i] = kNegInf; continue; }
            const double lse = logsumexp(m, [&](std::size_t j) { return (g[j] - cost(i, j)) / eps; });
            f[i] = eps * (log_mu[i] - lse);
        }
        for (std::size_t j = 0; j < m; ++j) {
            if (log_nu[j] == kNegInf) { g[j] = kNegInf; continue; }
            const double lse = logsumexp(n, [&](std::size_t i) { return (f[i] - cost(i, j)) / eps; });
            g[j] = eps * (log_nu[j] - lse);
        }
    };

    std::vector<double> schedule;
    if (cfg.epsilon_scaling)
        for (double e = 1.0; e > cfg.epsilon; e *= 0.5) schedule.push_back(e);
    for (double eps : schedule) {
        for (int it = 0; it < 100; ++it) {
            iterate(eps);
            ++res.total_iterations;
            build_plan(eps);
            if (marginal_violation(tp.plan, problem.mu, problem.nu) < 1e-4) break;
        }
    }

    const double eps = cfg.epsilon;
    for (int it = 0; it < cfg.max_iters; ++it) {
        iterate(eps);
        ++res.iterations;
        ++res.total_iterations;
        build_plan(eps);
        tp.marginal_violation = marginal_violation(tp.plan, problem.mu, problem.nu);
        if (tp.marginal_violation < cfg.tol) {
            res.converged = true;
            break;
        }
    }
    tp.objective = plan_objective(problem.cost, tp.plan);
    return res;
}

// ---------------------------------------------------------------------------
// Exact Kantorovich: min-cost flow source -> rows -> cols -> sink.

TransportPlan exact_kp(const OTProblem& problem) {
    problem.validate();
    const std::size_t n = problem.rows();
    const std::size_t m = problem.cols();
    if (n > kExactKpMaxSize || m > kExactKpMaxSize)
        throw std::length_error("exact_kp: problem exceeds " + std::to_string(kExactKpMaxSize) + " per side");

    constexpr double kFlowEps = 1e-15;
    constexpr double kInf = std::numeric_limits<double>::infinity();

    double cmin = std::numeric_limits<double>::infinity();
    for (double c : problem.cost.data()) cmin = std::min(cmin, c);

    struct Edge {
        std::size_t to;
        double cap;
        double cost;
        std::size_t rev;
    };
    const std::size_t nodes = n + m + 2;
    const std::size_t src = n + m, sink = n + m + 1;
    std::vector<std::vector<Edge>> adj(nodes);
    auto add_edge = [&](std::size_t u, std::size_t v, double cap, double cost) {
        adj[u].push_back({v, cap, cost, adj[v].size()});
        adj[v].push_back({u, 0.0, -cost, adj[u].size() - 1});
    };
    for (std::size_t i = 0; i < n; ++i) add_edge(src, i, problem.mu[i], 0.0);
    std::vector<std::vector<std::size_t>> cell_edge(n, std::vector<std::size_t>(m));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            cell_edge[i][j] = adj[i].size();
            add_edge(i, n + j, kInf, problem.cost(i, j) - cmin);
        }
    for (std::size_t j = 0; j < m; ++j) add_edge(n + j, sink, problem.nu[j], 0.0);

    const double target = std::min(std::accumulate(problem.mu.begin(), problem.mu.end(), 0.0),
                                   std::accumulate(problem.nu.begin(), problem.nu.end(), 0.0));
    std::vector<double> potential(nodes, 0.0), dist(nodes);
    std::vector<std::size_t> prev_node(nodes), prev_edge(nodes);
    std::vector<bool> done(nodes);
    double flow = 0.0;

    while (flow < target - kFlowEps) {
        // Dense Dijkstra on reduced costs.
        std::fill(dist.begin(), dist.end(), kInf);
        std::fill(done.begin(), done.end(), false);
        dist[src] = 0.0;
        for (;;) {
            std::size_t u = nodes;
            for (std::size_t v = 0; v < nodes; ++v)
                if (!done[v] && dist[v] < kInf && (u == nodes || dist[v] < dist[u])) u = v;
            if (u == nodes) break;
            done[u] = true;
            for (std::size_t k = 0; k < adj[u].size(); ++k) {
                const Edge& e = adj[u][k];
                if (e.cap <= kFlowEps) continue;
                const double nd = dist[u] + e.cost + potential[u] - potential[e.to];
                if (nd < dist[e.to] - 1e-15) {
                    dist[e.to] = nd;
                    prev_node[e.to] = u;
                    prev_edge[e.to] = k;
                }
            }
        }
        if (dist[sink] == kInf) break;
        for (std::size_t v = 0; v < nodes; ++v)
            if (dist[v] < kInf) potential[v] += dist[v];

        double push = target - flow;
        for (std::size_t v = sink; v != src; v = prev_node[v]) push = std::min(push, adj[prev_node[v]][prev_edge[v]].cap);
        for (std::size_t v = sink; v != src; v = prev_node[v]) {
            Edge& e = adj[prev_node[v]][prev_edge[v]];
            e.cap -= push;
            adj[e.to][e.rev].cap += push;
        }
        flow += push;
    }

    TransportPlan tp;
    tp.plan = Matrix(n, m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            const Edge& e = adj[i][cell_edge[i][j]];
            const double sent = adj[e.to][e.rev].cap; // residual of the reverse arc
            tp.plan(i, j) = sent > kFlowEps ? sent : 0.0;
            if (tp.plan(i, j) > 1e-12 && problem.cost(i, j) >= kInfiniteCost)
                throw std::domain_error("exact_kp: problem is infeasible without inadmissible pairings");
        }
    tp.objective = plan_objective(problem.cost, tp.plan);
    tp.marginal_violation = marginal_violation(tp.plan, problem.mu, problem.nu);
    return tp;
}

// ---------------------------------------------------------------------------
// Exact Monge

std::vector<std::size_t> hungarian(const Matrix& cost) {
    const std::size_t n = cost.rows();
    const std::size_t m = cost.cols();
    if (n > m) throw std::invalid_argument("hungarian: needs rows <= cols");
    constexpr double kInf = std::numeric_limits<double>::infinity();
    // 1-based potentials formulation; column 0 is the virtual start.
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<std::size_t> owner(m + 1, 0), way(m + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        owner[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(m + 1, kInf);
        std::vector<bool> used(m + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = owner[j0];
            double delta = kInf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (owner[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> col_of(n);
    for (std::size_t j = 1; j <= m; ++j)
        if (owner[j] != 0) col_of[owner[j] - 1] = j - 1;
    return col_of;
}

namespace {

Assignment assignment_from_columns(const Matrix& cost, const std::vector<std::size_t>& col_of) {
    Assignment a;
    for (std::size_t i = 0; i < col_of.size(); ++i) {
        a.pairs.emplace_back(i, col_of[i]);
        a.total_cost += cost(i, col_of[i]);
    }
    return a;
}

} // namespace

MongeSolution exact_mp(const OTProblem& problem) {
    problem.validate();
    const std::size_t n = problem.rows();
    if (n != problem.cols())
        throw std::domain_error("exact_mp: no Monge map between measures of unequal support size");
    if (!is_uniform(problem.mu) || !is_uniform(problem.nu))
        throw std::domain_error("exact_mp: non-uniform measures admit no permutation map");

    std::vector<std::size_t> best;
    if (n <= kBruteForceMaxSize) {
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        double best_cost = std::numeric_limits<double>::infinity();
        do {
            double c = 0.0;
            for (std::size_t i = 0; i < n; ++i) c += problem.cost(i, perm[i]);
            if (c < best_cost) {
                best_cost = c;
                best = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
    } else {
        best = hungarian(problem.cost);
    }

    MongeSolution sol;
    sol.assignment = assignment_from_columns(problem.cost, best);
    sol.objective = sol.assignment.total_cost / static_cast<double>(n);
    return sol;
}

Assignment round_plan(const Matrix& plan, const Matrix& cost) {
    const std::size_t n = plan.rows();
    const std::size_t m = plan.cols();
    struct Entry {
        double mass;
        std::size_t i, j;
    };
    std::vector<Entry> entries;
    entries.reserve(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) entries.push_back({plan(i, j), i, j});
    std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.mass > b.mass; });

    std::vector<bool> row_used(n, false), col_used(m, false);
    Assignment a;
    const std::size_t want = std::min(n, m);
    for (const Entry& e : entries) {
        if (a.pairs.size() == want) break;
        if (row_used[e.i] || col_used[e.j]) continue;
        row_used[e.i] = col_used[e.j] = true;
        a.pairs.emplace_back(e.i, e.j);
    }
    std::sort(a.pairs.begin(), a.pairs.end());
    for (const auto& [i, j] : a.pairs) a.total_cost += cost(i, j);
    for (std::size_t i = 0; i < n; ++i)
        if (!row_used[i]) a.unmatched_predictions.push_back(i);
    for (std::size_t j = 0; j < m; ++j)
        if (!col_used[j]) a.unmatched_ground_truths.push_back(j);
    return a;
}

double mp_kp_ratio(double mp_value, double kp_value) {
    if (kp_value <= 1e-15) {
        if (mp_value > 1e-12) throw std::logic_error("mp_kp_ratio: MP > KP = 0 contradicts MP >= KP >= 0 ordering");
        return 1.0;
    }
    return mp_value / kp_value;
}

double negative_iou(const AABox& p, const AABox& g, double mp_value, double kp_value) {
    return mp_kp_ratio(mp_value, kp_value) - iou(p, g);
}

OTProblem build_cost_matrix(std::span<const AABox> preds, std::span<const AABox> gts, MatchCost kind,
                            ShapeExponent theta) {
    if (preds.empty() || gts.empty()) throw std::invalid_argument("build_cost_matrix: empty box list");
    Matrix cost(preds.size(), gts.size());
    for (std::size_t i = 0; i < preds.size(); ++i)
        for (std::size_t j = 0; j < gts.size(); ++j)
            cost(i, j) = kind == MatchCost::NegativeIoU ? 1.0 - iou(preds[i], gts[j])
                                                        : baseline_loss(LossKind::SIoU, preds[i], gts[j], theta);
    return OTProblem::uniform(std::move(cost));
}

CostAssignment sinkhorn_assign(const Matrix& cost, const SinkhornConfig& cfg) {
    const std::size_t n = cost.rows();
    const std::size_t m = cost.cols();
    if (n == 0 || m == 0) throw std::invalid_argument("sinkhorn_assign: empty cost matrix");
    const std::size_t side = std::max(n, m);

    Matrix padded(side, side, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) padded(i, j) = cost(i, j);

    CostAssignment r;
    r.solver = sinkhorn(OTProblem::uniform(padded), cfg);
    const Assignment full = round_plan(r.solver.transport.plan, padded);

    for (const auto& [i, j] : full.pairs) {
        if (i < n && j < m) {
            r.assignment.pairs.emplace_back(i, j);
            r.assignment.total_cost += cost(i, j);
        }
    }
    std::vector<bool> row_used(n, false), col_used(m, false);
    for (const auto& [i, j] : r.assignment.pairs) row_used[i] = col_used[j] = true;
    for (std::size_t i = 0; i < n; ++i)
        if (!row_used[i]) r.assignment.unmatched_predictions.push_back(i);
    for (std::size_t j = 0; j < m; ++j)
        if (!col_used[j]) r.assignment.unmatched_ground_truths.push_back(j);
    return r;
}

MatchResult match(std::span<const AABox> preds, std::span<const AABox> gts, const MatchConfig& cfg) {
    if (gts.empty()) throw std::invalid_argument("match: no ground-truth boxes");
    if (preds.empty()) {
        MatchResult r;
        for (std::size_t j = 0; j < gts.size(); ++j) r.assignment.unmatched_ground_truths.push_back(j);
        r.solver.converged = true;
        return r;
    }

    const OTProblem base = build_cost_matrix(preds, gts, cfg.cost, cfg.theta);
    const std::size_t n = base.rows();
    const std::size_t m = base.cols();

    MatchResult r;
    CostAssignment ca = sinkhorn_assign(base.cost, cfg.sinkhorn);
    r.assignment = std::move(ca.assignment);
    r.solver = std::move(ca.solver);

    r.monge_feasible = n == m;
    r.ratio = 1.0;
    if (cfg.ratio == RatioMode::Exact && r.monge_feasible && n <= kExactKpMaxSize) {
        const double mp = exact_mp(base).objective;
        const double kp = exact_kp(base).objective;
        r.ratio = mp_kp_ratio(mp, kp);
    }

    for (const auto& [i, j] : r.assignment.pairs) {
        const double neg = r.ratio - iou(preds[i], gts[j]);
        r.losses.push_back(mks_loss(preds[i], gts[j], neg, cfg.theta));
    }
    return r;
}

} // namespace mks

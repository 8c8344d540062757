#include "uvsg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace uvsg {

void InferConfig::validate() const {
    if (support_size < 1) throw ConfigError("support size must be at least 1");
    if (ensemble < 1) throw ConfigError("ensemble count must be at least 1");
    if (!(threshold > 0 && threshold < 1)) throw ConfigError("threshold must be inside (0,1)");
}

nlohmann::json EvalReport::to_json() const {
    return {{"per_subject", per_subject},
            {"mean", mean},
            {"bootstrap_stddev", bootstrap_stddev},
            {"config", config}};
}

Tensor ensemble_predict(const ModelParameters& params, const NetworkConfig& net,
                        const Tensor& query, const TaskArchive& archive,
                        const std::vector<int>& pool, int n, int k, Rng& rng,
                        int exclude_index) {
    if (n < 1 || k < 1) throw DomainError("support and ensemble sizes must be at least 1");
    std::vector<int> usable;
    for (int idx : pool)
        if (idx != exclude_index) usable.push_back(idx);
    if (usable.empty()) throw DomainError("no support subjects available");

    Tensor mean(query.shape);
    for (int draw = 0; draw < k; ++draw) {
        std::vector<std::pair<Tensor, Tensor>> support;
        support.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
            support.push_back(
                archive.subjects[static_cast<std::size_t>(usable[rng.below(usable.size())])]);
        Tensor soft = predict_soft(params, net, query, support);
        for (std::size_t i = 0; i < mean.data.size(); ++i) mean.data[i] += soft.data[i];
    }
    for (float& v : mean.data) v /= static_cast<float>(k);
    return mean;
}

Tensor threshold(const Tensor& soft, double tau) {
    if (!(tau > 0 && tau < 1)) throw DomainError("threshold must be inside (0,1)");
    Tensor out(soft.shape);
    for (std::size_t i = 0; i < soft.data.size(); ++i)
        out.data[i] = soft.data[i] > tau ? 1.f : 0.f;
    return out;
}

double dice_score(const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape) throw ShapeError("dice_score shape mismatch");
    long inter = 0, ca = 0, cb = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const float va = a.data[i], vb = b.data[i];
        if ((va != 0.f && va != 1.f) || (vb != 0.f && vb != 1.f))
            throw DomainError("dice_score expects binary maps");
        ca += va == 1.f;
        cb += vb == 1.f;
        inter += (va == 1.f && vb == 1.f);
    }
    if (ca + cb == 0) return 100.0;  // both empty: perfect agreement by convention
    return 100.0 * 2.0 * static_cast<double>(inter) / static_cast<double>(ca + cb);
}

double bootstrap_std(const std::vector<double>& scores, int reps, Rng& rng) {
    if (scores.empty()) throw DomainError("bootstrap over an empty score list");
    if (reps < 1) throw DomainError("bootstrap needs at least one repetition");
    std::vector<double> means;
    means.reserve(static_cast<std::size_t>(reps));
    for (int r = 0; r < reps; ++r) {
        double sum = 0;
        for (std::size_t i = 0; i < scores.size(); ++i)
            sum += scores[static_cast<std::size_t>(rng.below(scores.size()))];
        means.push_back(sum / static_cast<double>(scores.size()));
    }
    double mu = 0;
    for (double m : means) mu += m;
    mu /= static_cast<double>(reps);
    double var = 0;
    for (double m : means) var += (m - mu) * (m - mu);
    return std::sqrt(var / static_cast<double>(reps));
}

EvalReport evaluate_split(const ModelParameters& params, const NetworkConfig& net,
                          const TaskArchive& archive, const std::vector<int>& query_split,
                          const std::vector<int>& support_pool, const InferConfig& cfg) {
    cfg.validate();
    if (query_split.empty()) throw DomainError("empty evaluation split");
    EvalReport report;
    for (int qi : query_split) {
        // per-subject substream, so subject order and parallelism are immaterial
        Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(qi)));
        const auto& [image, label] = archive.subjects[static_cast<std::size_t>(qi)];
        Tensor soft = ensemble_predict(params, net, image, archive, support_pool,
                                       cfg.support_size, cfg.ensemble, rng, qi);
        report.per_subject.push_back(dice_score(threshold(soft, cfg.threshold), label));
    }
    for (double d : report.per_subject) report.mean += d;
    report.mean /= static_cast<double>(report.per_subject.size());
    Rng boot(derive_seed(cfg.seed, 0xB007ULL));
    report.bootstrap_stddev = bootstrap_std(report.per_subject, 1000, boot);
    report.config = {{"support_size", cfg.support_size},
                     {"ensemble", cfg.ensemble},
                     {"threshold", cfg.threshold},
                     {"seed", cfg.seed},
                     {"empty_empty_dice", 100.0}};
    return report;
}

namespace {

// One full pass over the test split; shared by the support-size sweep and the
// ensemble grid so matching seeds give matching numbers.
double eval_repetition(const ModelParameters& params, const NetworkConfig& net,
                       const TaskArchive& archive, int n, int k, std::uint64_t rep_seed) {
    InferConfig cfg;
    cfg.support_size = n;
    cfg.ensemble = k;
    cfg.seed = rep_seed;
    return evaluate_split(params, net, archive, archive.splits.test, archive.splits.support, cfg)
        .mean;
}

}  // namespace

std::vector<SupportSweepRow> sweep_support_size(const ModelParameters& params,
                                                const NetworkConfig& net,
                                                const TaskArchive& archive,
                                                const std::vector<int>& ns, int k,
                                                std::uint64_t seed) {
    std::vector<SupportSweepRow> rows;
    for (int n : ns) {
        const std::uint64_t rep_seed =
            derive_seed(derive_seed(seed, static_cast<std::uint64_t>(n)), 0);
        rows.push_back({n, eval_repetition(params, net, archive, n, k, rep_seed)});
    }
    return rows;
}

std::vector<GridCell> sweep_ensemble_grid(const ModelParameters& params, const NetworkConfig& net,
                                          const TaskArchive& archive, const std::vector<int>& ns,
                                          const std::vector<int>& ks, int reps,
                                          std::uint64_t seed) {
    if (reps < 1) throw DomainError("grid needs at least one repetition");
    std::vector<GridCell> cells;
    for (int n : ns) {
        const std::uint64_t n_seed = derive_seed(seed, static_cast<std::uint64_t>(n));
        for (int k : ks) {
            std::vector<double> means;
            for (int r = 0; r < reps; ++r)
                means.push_back(eval_repetition(params, net, archive, n, k,
                                                derive_seed(n_seed, static_cast<std::uint64_t>(r))));
            GridCell cell;
            cell.n = n;
            cell.k = k;
            for (double m : means) cell.mean += m;
            cell.mean /= static_cast<double>(reps);
            for (double m : means) cell.std += (m - cell.mean) * (m - cell.mean);
            cell.std = std::sqrt(cell.std / static_cast<double>(reps));
            cells.push_back(cell);
        }
    }
    return cells;
}

std::vector<PoolRow> sweep_limited_data(const ModelParameters& params, const NetworkConfig& net,
                                        const TaskArchive& archive,
                                        const std::vector<int>& pool_sizes, int reps,
                                        std::uint64_t seed) {
    if (reps < 1) throw DomainError("limited-data sweep needs at least one repetition");
    std::vector<PoolRow> rows;
    for (int p : pool_sizes) {
        if (p < 1 || p > static_cast<int>(archive.splits.support.size()))
            throw DomainError("pool size outside the support split");
        std::vector<double> means;
        for (int r = 0; r < reps; ++r) {
            Rng rng(derive_seed(derive_seed(seed, 0x9000ULL + static_cast<std::uint64_t>(p)),
                                static_cast<std::uint64_t>(r)));
            std::vector<int> pool = archive.splits.support;
            rng.shuffle(pool);
            pool.resize(static_cast<std::size_t>(p));
            std::vector<std::pair<Tensor, Tensor>> support;
            for (int idx : pool) support.push_back(archive.subjects[static_cast<std::size_t>(idx)]);
            double sum = 0;
            for (int qi : archive.splits.test) {
                const auto& [image, label] = archive.subjects[static_cast<std::size_t>(qi)];
                Tensor soft = predict_soft(params, net, image, support);
                sum += dice_score(threshold(soft, 0.5), label);
            }
            means.push_back(sum / static_cast<double>(archive.splits.test.size()));
        }
        PoolRow row;
        row.pool_size = p;
        for (double m : means) row.mean += m;
        row.mean /= static_cast<double>(reps);
        for (double m : means) row.std += (m - row.mean) * (m - row.mean);
        row.std = std::sqrt(row.std / static_cast<double>(reps));
        rows.push_back(row);
    }
    return rows;
}

std::string to_csv(const std::vector<SupportSweepRow>& rows) {
    std::ostringstream os;
    os << "n,mean_dice\n";
    for (const auto& r : rows) os << r.n << "," << r.mean_dice << "\n";
    return os.str();
}

std::string to_csv(const std::vector<GridCell>& cells) {
    std::ostringstream os;
    os << "n,k,mean_dice,std_dice\n";
    for (const auto& c : cells) os << c.n << "," << c.k << "," << c.mean << "," << c.std << "\n";
    return os.str();
}

std::string to_csv(const std::vector<PoolRow>& rows) {
    std::ostringstream os;
    os << "pool_size,mean_dice,std_dice\n";
    for (const auto& r : rows) os << r.pool_size << "," << r.mean << "," << r.std << "\n";
    return os.str();
}

}  // namespace uvsg

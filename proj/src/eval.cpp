#include "oodrl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "oodrl/csvfmt.hpp"

namespace oodrl {

std::uint64_t derive_run_seed(std::uint64_t base_seed, long long snapshot_episode,
                              Variant variant, int run) {
    std::uint64_t s = Rng::derive(base_seed, 0xEFA1);
    s = Rng::derive(s, static_cast<std::uint64_t>(snapshot_episode));
    s = Rng::derive(s, variant == Variant::train ? 0 : 1);
    return Rng::derive(s, static_cast<std::uint64_t>(run));
}

EpisodeTrace eval_episode(const QNet& net, long long snapshot_episode, const GridSpec& spec,
                          Variant variant, int run, std::uint64_t base_seed, PriorCache* cache) {
    Rng rng(derive_run_seed(base_seed, snapshot_episode, variant, run));
    EpisodeTrace trace;
    trace.snapshot_episode = snapshot_episode;
    trace.variant = variant;
    trace.run = run;

    EnvState state = reset(spec, rng);
    while (!state.done) {
        const std::vector<double> obs = encode(state, spec);
        StepRecord rec;
        rec.x = state.agent % spec.width;
        rec.y = state.agent / spec.width;
        int action;
        if (net.hyper.is_dropout()) {
            McPrediction pred = mc_predict(net, obs, rng);
            action = greedy_action(pred.q.mean_q);
            rec.epistemic = pred.q.epistemic_var[action];
            rec.aleatoric = pred.q.aleatoric_var[action];
            rec.has_aleatoric = true;
        } else {
            const long long key = static_cast<long long>(state.agent) * spec.n_cells() + state.goal;
            EnsemblePrediction pred = ensemble_predict(net, obs, cached_prior_q(net, obs, key, cache));
            action = greedy_action(pred.q.mean_q);
            rec.epistemic = pred.q.epistemic_var[action];
        }
        rec.action = action;
        rec.reward = step(state, spec, static_cast<Action>(action)).reward;
        trace.steps.push_back(rec);
    }
    trace.outcome = state.outcome;
    return trace;
}

std::vector<EpisodeTrace> run_evaluation(const Snapshot& snap, const GridSpec& spec,
                                         Variant variant, int n_runs, std::uint64_t base_seed) {
    return run_evaluation_parallel(snap, spec, variant, n_runs, base_seed, 1);
}

std::vector<EpisodeTrace> run_evaluation_parallel(const Snapshot& snap, const GridSpec& spec,
                                                  Variant variant, int n_runs,
                                                  std::uint64_t base_seed, int jobs) {
    if (n_runs < 1) throw std::invalid_argument("run_evaluation: n_runs must be >= 1");
    const std::uint64_t hash_before = snapshot_content_hash(snap);
    std::vector<EpisodeTrace> traces(n_runs);
    if (jobs <= 1) {
        PriorCache cache;
        for (int run = 0; run < n_runs; ++run)
            traces[run] =
                eval_episode(snap.net, snap.episode, spec, variant, run, base_seed, &cache);
    } else {
#ifdef _OPENMP
#pragma omp parallel num_threads(jobs)
        {
            PriorCache cache;  // per-thread; values are pure functions of the frozen priors
#pragma omp for schedule(dynamic)
            for (int run = 0; run < n_runs; ++run)
                traces[run] =
                    eval_episode(snap.net, snap.episode, spec, variant, run, base_seed, &cache);
        }
#else
        PriorCache cache;
        for (int run = 0; run < n_runs; ++run)
            traces[run] =
                eval_episode(snap.net, snap.episode, spec, variant, run, base_seed, &cache);
#endif
    }
    if (snapshot_content_hash(snap) != hash_before)
        throw std::runtime_error("run_evaluation: snapshot mutated during evaluation");
    return traces;
}

double episode_mean_uncertainty(const EpisodeTrace& trace) {
    if (trace.steps.empty())
        throw std::invalid_argument("episode_mean_uncertainty: empty trace");
    double sum = 0.0;
    for (const auto& rec : trace.steps) sum += rec.epistemic;
    return sum / static_cast<double>(trace.steps.size());
}

double auroc(std::span<const double> ood_scores, std::span<const double> id_scores) {
    if (ood_scores.empty() || id_scores.empty())
        throw std::invalid_argument("auroc: empty score list");
    struct Entry {
        double score;
        bool ood;
    };
    std::vector<Entry> all;
    all.reserve(ood_scores.size() + id_scores.size());
    for (double s : ood_scores) all.push_back({s, true});
    for (double s : id_scores) all.push_back({s, false});
    std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.score < b.score; });

    // rank sum with average ranks over ties
    double rank_sum_ood = 0.0;
    size_t i = 0;
    while (i < all.size()) {
        size_t j = i;
        while (j < all.size() && all[j].score == all[i].score) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (size_t k = i; k < j; ++k)
            if (all[k].ood) rank_sum_ood += avg_rank;
        i = j;
    }
    const double n_ood = static_cast<double>(ood_scores.size());
    const double n_id = static_cast<double>(id_scores.size());
    const double u = rank_sum_ood - n_ood * (n_ood + 1.0) / 2.0;
    return u / (n_ood * n_id);
}

double quantile_nearest_rank(std::vector<double> scores, double q) {
    if (scores.empty()) throw std::invalid_argument("quantile_nearest_rank: empty list");
    if (q <= 0.0 || q > 1.0) throw std::invalid_argument("quantile_nearest_rank: q out of (0,1]");
    std::sort(scores.begin(), scores.end());
    const auto n = static_cast<double>(scores.size());
    auto rank = static_cast<size_t>(std::ceil(q * n));
    rank = std::max<size_t>(1, std::min(rank, scores.size()));
    return scores[rank - 1];
}

Detection threshold_detect(double score, double threshold) {
    if (!std::isfinite(threshold)) throw std::invalid_argument("threshold_detect: bad threshold");
    return score > threshold ? Detection::out_of_distribution : Detection::in_distribution;
}

MetricsRow aggregate(long long snapshot_episode, const std::vector<EpisodeTrace>& train_traces,
                     const std::vector<EpisodeTrace>& mirror_traces) {
    if (train_traces.empty() || mirror_traces.empty())
        throw std::invalid_argument("aggregate: both variants required");
    auto episode_means = [](const std::vector<EpisodeTrace>& traces) {
        std::vector<double> means;
        means.reserve(traces.size());
        for (const auto& t : traces) means.push_back(episode_mean_uncertainty(t));
        return means;
    };
    const auto train_means = episode_means(train_traces);
    const auto mirror_means = episode_means(mirror_traces);
    auto mean_of = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    MetricsRow row;
    row.snapshot_episode = snapshot_episode;
    row.train_mean_epi = mean_of(train_means);
    row.mirror_mean_epi = mean_of(mirror_means);
    row.train_runs = static_cast<int>(train_traces.size());
    row.mirror_runs = static_cast<int>(mirror_traces.size());
    row.separation = row.mirror_mean_epi / row.train_mean_epi;
    row.auroc = auroc(mirror_means, train_means);
    return row;
}

void write_traces_csv(const std::string& path, const std::vector<EpisodeTrace>& traces) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("write_traces_csv: cannot open " + path);
    out << "snapshot_episode,variant,run,step,x,y,action,reward,epistemic_var,aleatoric_var\n";
    for (const auto& trace : traces) {
        for (size_t s = 0; s < trace.steps.size(); ++s) {
            const auto& rec = trace.steps[s];
            out << trace.snapshot_episode << ',' << variant_name(trace.variant) << ','
                << trace.run << ',' << s << ',' << rec.x << ',' << rec.y << ',' << rec.action
                << ',' << fmt_double(rec.reward) << ',' << fmt_double(rec.epistemic) << ',';
            if (rec.has_aleatoric) out << fmt_double(rec.aleatoric);
            out << '\n';
        }
    }
    if (!out) throw std::runtime_error("write_traces_csv: write failed for " + path);
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("write_metrics_csv: cannot open " + path);
    out << "snapshot_episode,train_mean_epi,mirror_mean_epi,separation,auroc\n";
    for (const auto& row : rows)
        out << row.snapshot_episode << ',' << fmt_double(row.train_mean_epi) << ','
            << fmt_double(row.mirror_mean_epi) << ',' << fmt_double(row.separation) << ','
            << fmt_double(row.auroc) << '\n';
    if (!out) throw std::runtime_error("write_metrics_csv: write failed for " + path);
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_metrics_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) ||
        line != "snapshot_episode,train_mean_epi,mirror_mean_epi,separation,auroc")
        throw std::runtime_error("read_metrics_csv: bad header in " + path);
    std::vector<MetricsRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 5) throw std::runtime_error("read_metrics_csv: bad row: " + line);
        MetricsRow row;
        row.snapshot_episode = std::stoll(fields[0]);
        row.train_mean_epi = parse_double(fields[1]);
        row.mirror_mean_epi = parse_double(fields[2]);
        row.separation = parse_double(fields[3]);
        row.auroc = parse_double(fields[4]);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace oodrl

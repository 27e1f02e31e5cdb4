#include "fpg/dataset.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fpg {

Dataset::Dataset(int horizon, std::vector<Episode> episodes, DatasetMeta meta)
    : horizon_(horizon), episodes_(std::move(episodes)), meta_(std::move(meta)) {
    if (horizon_ <= 0) throw ConfigError("dataset horizon must be positive");
    for (std::size_t k = 0; k < episodes_.size(); ++k) {
        const auto& steps = episodes_[k].steps;
        if (steps.size() != static_cast<std::size_t>(horizon_)) {
            throw ConfigError("episode " + std::to_string(k) + " has " + std::to_string(steps.size()) +
                              " steps, expected horizon " + std::to_string(horizon_));
        }
        for (std::size_t h = 0; h < steps.size(); ++h) {
            const Step& st = steps[h];
            if (st.s < 0 || st.a < 0 || st.s_next < 0) {
                throw ConfigError("episode " + std::to_string(k) + " has a negative id");
            }
            if (meta_.n_states > 0 && (st.s >= meta_.n_states || st.s_next >= meta_.n_states)) {
                throw ConfigError("episode " + std::to_string(k) + " state id out of range");
            }
            if (meta_.n_actions > 0 && st.a >= meta_.n_actions) {
                throw ConfigError("episode " + std::to_string(k) + " action id out of range");
            }
            if (h + 1 < steps.size() && st.s_next != steps[h + 1].s) {
                throw ConfigError("episode " + std::to_string(k) + ": s_next at h=" + std::to_string(h + 1) +
                                  " differs from the next state");
            }
        }
    }
}

Dataset Dataset::resample(const std::vector<std::size_t>& indices) const {
    std::vector<Episode> eps;
    eps.reserve(indices.size());
    for (std::size_t i : indices) eps.push_back(episodes_.at(i));
    return Dataset(horizon_, std::move(eps), meta_);
}

Dataset Dataset::scale_rewards(double c) const {
    std::vector<Episode> eps = episodes_;
    for (auto& ep : eps) {
        for (auto& st : ep.steps) st.r *= c;
    }
    return Dataset(horizon_, std::move(eps), meta_);
}

Dataset concat(const std::vector<const Dataset*>& parts) {
    if (parts.empty()) throw InputError("concat needs at least one dataset");
    std::vector<Episode> eps;
    for (const Dataset* d : parts) {
        if (d->horizon() != parts.front()->horizon()) throw ConfigError("concat: horizons differ");
        eps.insert(eps.end(), d->episodes().begin(), d->episodes().end());
    }
    DatasetMeta meta = parts.front()->meta();
    meta.behavior = "pooled(" + std::to_string(parts.size()) + ")";
    return Dataset(parts.front()->horizon(), std::move(eps), meta);
}

Dataset simulate(const MdpSpec& mdp, const ActionDistribution& behavior, std::size_t episodes,
                 std::uint64_t seed) {
    if (episodes == 0) throw InputError("simulate needs K >= 1 episodes");
    check_dims(mdp, behavior);
    const int S = mdp.n_states(), H = mdp.horizon();
    std::vector<Episode> eps(episodes);
    parallel_for(episodes, [&](std::size_t k) {
        Rng rng = stream_rng(seed, k);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        auto draw_state = [&](const double* p) {
            const double u = unif(rng);
            double acc = 0.0;
            int last = 0;
            for (int s = 0; s < S; ++s) {
                if (p[s] <= 0.0) continue;
                acc += p[s];
                last = s;
                if (u < acc) return s;
            }
            return last;
        };
        Episode& ep = eps[k];
        ep.steps.resize(H);
        int s = draw_state(mdp.initial_dist().data());
        for (int h = 0; h < H; ++h) {
            const int a = behavior.sample_action(h, s, rng);
            const int s2 = draw_state(mdp.p_row(h, s, a));
            ep.steps[h] = Step{s, a, mdp.r(h, s, a), s2};
            s = s2;
        }
    });
    DatasetMeta meta;
    meta.seed = seed;
    meta.behavior = behavior.describe();
    meta.env_hash = hex64(mdp.hash());
    meta.n_states = mdp.n_states();
    meta.n_actions = mdp.n_actions();
    return Dataset(H, std::move(eps), std::move(meta));
}

// ---------------------------------------------------------------------------

void save_jsonl(const Dataset& data, std::ostream& out) {
    nlohmann::json meta;
    meta["horizon"] = data.horizon();
    meta["seed"] = data.meta().seed;
    meta["behavior"] = data.meta().behavior;
    meta["env_hash"] = data.meta().env_hash;
    meta["n_states"] = data.meta().n_states;
    meta["n_actions"] = data.meta().n_actions;
    out << nlohmann::json{{"meta", meta}}.dump() << '\n';
    for (std::size_t k = 0; k < data.size(); ++k) {
        nlohmann::json steps = nlohmann::json::array();
        int h = 1;
        for (const Step& st : data[k].steps) {
            steps.push_back(nlohmann::json::array({h++, st.s, st.a, st.r, st.s_next}));
        }
        out << nlohmann::json{{"k", k}, {"steps", std::move(steps)}}.dump() << '\n';
    }
}

void save_jsonl(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open " + path + " for writing");
    save_jsonl(data, out);
}

Dataset load_jsonl(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    DatasetMeta meta;
    int horizon = 0;
    std::vector<Episode> eps;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("malformed JSON record: ") + e.what(), line_no);
        }
        try {
            if (doc.contains("meta")) {
                const auto& m = doc["meta"];
                horizon = m.value("horizon", 0);
                meta.seed = m.value("seed", std::uint64_t{0});
                meta.behavior = m.value("behavior", std::string());
                meta.env_hash = m.value("env_hash", std::string());
                meta.n_states = m.value("n_states", 0);
                meta.n_actions = m.value("n_actions", 0);
                continue;
            }
            const auto& steps = doc.at("steps");
            if (!steps.is_array()) throw ParseError("\"steps\" is not an array", line_no);
            Episode ep;
            for (std::size_t i = 0; i < steps.size(); ++i) {
                const auto& rec = steps[i];
                if (!rec.is_array() || rec.size() != 5) {
                    throw ParseError("step record must be [h, s, a, r, s_next]", line_no);
                }
                const int h = rec[0].get<int>();
                if (h != static_cast<int>(i) + 1) {
                    throw ParseError("step index " + std::to_string(h) + " out of order, expected " +
                                     std::to_string(i + 1), line_no);
                }
                ep.steps.push_back(Step{rec[1].get<int>(), rec[2].get<int>(), rec[3].get<double>(), rec[4].get<int>()});
            }
            if (horizon == 0) horizon = static_cast<int>(ep.steps.size());
            if (ep.steps.size() != static_cast<std::size_t>(horizon)) {
                throw ConfigError("episode on line " + std::to_string(line_no) + " has " +
                                  std::to_string(ep.steps.size()) + " steps, expected horizon " +
                                  std::to_string(horizon));
            }
            eps.push_back(std::move(ep));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("malformed episode record: ") + e.what(), line_no);
        }
    }
    if (horizon == 0) throw ParseError("dataset file contains no episodes", line_no);
    try {
        return Dataset(horizon, std::move(eps), std::move(meta));
    } catch (const ConfigError& e) {
        throw ParseError(e.what(), 0);
    }
}

Dataset load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset " + path);
    return load_jsonl(in);
}

// ---------------------------------------------------------------------------

EmpiricalModel empirical_model(const Dataset& data, int n_states, int n_actions) {
    const int S = n_states, A = n_actions, H = data.horizon();
    const std::size_t cells = static_cast<std::size_t>(H) * S * A;
    std::vector<std::size_t> counts(cells, 0);
    std::vector<double> next_counts(cells * S, 0.0), reward_sum(cells, 0.0);
    Vector start = Vector::Zero(S);
    for (const Episode& ep : data.episodes()) {
        start[ep.steps.front().s] += 1.0;
        for (int h = 0; h < H; ++h) {
            const Step& st = ep.steps[h];
            if (st.s >= S || st.a >= A || st.s_next >= S) throw ConfigError("empirical model: id out of range");
            const std::size_t c = (static_cast<std::size_t>(h) * S + st.s) * A + st.a;
            ++counts[c];
            next_counts[c * S + st.s_next] += 1.0;
            reward_sum[c] += st.r;
        }
    }
    std::vector<double> transition(cells * S, 0.0), reward(cells, 0.0);
    std::vector<std::uint8_t> visited(cells, 0);
    for (int h = 0; h < H; ++h) {
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) {
                const std::size_t c = (static_cast<std::size_t>(h) * S + s) * A + a;
                if (counts[c] == 0) {
                    transition[c * S + s] = 1.0;
                    continue;
                }
                visited[c] = 1;
                const double n = static_cast<double>(counts[c]);
                for (int s2 = 0; s2 < S; ++s2) transition[c * S + s2] = next_counts[c * S + s2] / n;
                reward[c] = reward_sum[c] / n;
            }
        }
    }
    if (data.size() > 0) start /= static_cast<double>(data.size());
    return EmpiricalModel{MdpSpec(S, A, H, std::move(transition), std::move(reward), start),
                          std::move(visited), std::move(counts)};
}

}  // namespace fpg

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fpg/common.hpp"
#include "fpg/mdp.hpp"
#include "fpg/policy.hpp"

namespace fpg {

/// One transition (s_h, a_h, r_h, s_{h+1}); h is the position in the episode.
struct Step {
    int s = 0;
    int a = 0;
    double r = 0.0;
    int s_next = 0;

    bool operator==(const Step&) const = default;
};

struct Episode {
    std::vector<Step> steps;

    bool operator==(const Episode&) const = default;
};

struct DatasetMeta {
    std::uint64_t seed = 0;
    std::string behavior;
    std::string env_hash;
    int n_states = 0;   // 0 when unknown
    int n_actions = 0;

    bool operator==(const DatasetMeta&) const = default;
};

/// K episodes of equal horizon H. Immutable after construction.
///
/// Validation: every episode has exactly H steps and s_next of step h equals s of
/// step h+1. When meta carries state/action counts, ids are range-checked too.
class Dataset {
public:
    Dataset(int horizon, std::vector<Episode> episodes, DatasetMeta meta = {});

    int horizon() const { return horizon_; }
    std::size_t size() const { return episodes_.size(); }
    const std::vector<Episode>& episodes() const { return episodes_; }
    const Episode& operator[](std::size_t k) const { return episodes_[k]; }
    const DatasetMeta& meta() const { return meta_; }

    /// Same meta, episodes picked by index (with repetition allowed).
    Dataset resample(const std::vector<std::size_t>& indices) const;
    /// Copy with every reward multiplied by c.
    Dataset scale_rewards(double c) const;

    bool operator==(const Dataset&) const = default;

private:
    int horizon_;
    std::vector<Episode> episodes_;
    DatasetMeta meta_;
};

/// Concatenates datasets of equal horizon.
Dataset concat(const std::vector<const Dataset*>& parts);

/// K episodes under `behavior`. Episode k draws from stream_rng(seed, k), so the
/// result is independent of thread scheduling.
Dataset simulate(const MdpSpec& mdp, const ActionDistribution& behavior, std::size_t episodes,
                 std::uint64_t seed);

/// JSON Lines: an optional {"meta": {...}} header line, then one
/// {"k": int, "steps": [[h, s, a, r, s_next], ...]} per episode with h = 1..H.
void save_jsonl(const Dataset& data, std::ostream& out);
void save_jsonl(const Dataset& data, const std::string& path);
Dataset load_jsonl(std::istream& in);
Dataset load_jsonl(const std::string& path);

/// Certainty-equivalent tabular model. Unvisited (h, s, a) cells get a self-loop
/// and zero reward and are marked in `visited`. The initial distribution is the
/// empirical distribution of first states.
struct EmpiricalModel {
    MdpSpec model;
    std::vector<std::uint8_t> visited;  // [h][s][a] flat
    std::vector<std::size_t> counts;    // [h][s][a] flat

    bool is_visited(int h, int s, int a) const {
        return visited[(static_cast<std::size_t>(h) * model.n_states() + s) * model.n_actions() + a] != 0;
    }
};

EmpiricalModel empirical_model(const Dataset& data, int n_states, int n_actions);

}  // namespace fpg

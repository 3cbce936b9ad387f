#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sciline/corpus.hpp"
#include "sciline/embed_space.hpp"

namespace sciline {

// Nodes are dense indices. Edges point from a citing paper to its reference.
class CitationGraph {
public:
    CitationGraph() = default;

    // References that do not resolve to a corpus paper are dropped and counted.
    static CitationGraph from_corpus(const Corpus& corpus);
    static CitationGraph from_edges(std::vector<std::string> ids, std::vector<int> years,
                                    std::span<const std::pair<std::uint32_t, std::uint32_t>> edges);

    std::size_t size() const { return ids_.size(); }
    std::size_t edge_count() const { return ref_targets_.size(); }
    std::size_t unresolved_references() const { return unresolved_; }
    const std::string& id(std::uint32_t node) const { return ids_[node]; }
    int year(std::uint32_t node) const { return years_[node]; }
    std::optional<std::uint32_t> node(std::string_view paper_id) const;
    std::uint32_t require_node(std::string_view paper_id) const;

    // Both sorted ascending.
    std::span<const std::uint32_t> references(std::uint32_t node) const {
        return {ref_targets_.data() + ref_offsets_[node], ref_offsets_[node + 1] - ref_offsets_[node]};
    }
    std::span<const std::uint32_t> citers(std::uint32_t node) const {
        return {cite_sources_.data() + cite_offsets_[node], cite_offsets_[node + 1] - cite_offsets_[node]};
    }

private:
    void build(std::vector<std::pair<std::uint32_t, std::uint32_t>> edges);

    std::vector<std::string> ids_;
    std::vector<int> years_;
    std::unordered_map<std::string, std::uint32_t> by_id_;
    std::vector<std::size_t> ref_offsets_;
    std::vector<std::uint32_t> ref_targets_;
    std::vector<std::size_t> cite_offsets_;
    std::vector<std::uint32_t> cite_sources_;
    std::size_t unresolved_ = 0;
};

// Undefined (nullopt) when no later paper cites the focal paper or its references.
std::optional<double> cd_index(const CitationGraph& graph, std::uint32_t node);
std::optional<double> cd_index(const CitationGraph& graph, std::string_view paper_id);

// Size of the citer set the CD index averages over.
std::size_t cd_citer_count(const CitationGraph& graph, std::uint32_t node);

struct ReferenceTerm {
    std::string reference_id;
    double c = 0.0;
    double d = 0.0;
    std::size_t n_citers = 0;
    bool empty = false;  // no later citer of the paper or this reference
};

struct DisruptionProfile {
    std::string paper_id;
    int year = 0;
    std::optional<double> cd;
    std::vector<ReferenceTerm> per_ref;
    std::optional<double> c_prime;
    std::optional<double> d_prime;
    std::optional<double> cd_prime;
    std::size_t n_citers = 0;
    std::size_t n_refs = 0;
};

// literal: CD' is the dispersion of D_j - C_j as computed; otherwise the
// equivalent per-reference focal citation rate mean(f) is used directly.
DisruptionProfile decompose_cd(const CitationGraph& graph, std::uint32_t node, bool cd_prime_literal = true);
DisruptionProfile decompose_cd(const CitationGraph& graph, std::string_view paper_id, bool cd_prime_literal = true);

// All papers in node order, computed in parallel.
std::vector<DisruptionProfile> all_profiles(const CitationGraph& graph, bool cd_prime_literal = true);

struct DisruptionRatio {
    int year = 0;
    double cutoff = 0.0;
    double p_stylized = 0.0;
    double p_popularized = 0.0;
    std::size_t n_stylized = 0;
    std::size_t n_popularized = 0;
    std::optional<double> ratio;
    bool undefined = false;  // zero denominator
};

DisruptionRatio disruption_ratio(std::span<const double> stylized_cd, std::span<const double> popularized_cd);

// Uses papers of the given year that have a defined CD and a label.
DisruptionRatio disruption_ratio(std::span<const DisruptionProfile> profiles,
                                 const std::unordered_map<std::string, Label>& labels, int year);

// Power iteration; rank flows from a citing paper to its references.
std::vector<double> pagerank(const CitationGraph& graph, double damping = 0.85, double tol = 1e-10,
                             int max_iter = 10000);

}  // namespace sciline

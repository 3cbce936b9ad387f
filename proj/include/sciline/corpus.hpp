#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <map>
#include <unordered_map>
#include <variant>
#include <vector>

namespace sciline {

inline constexpr std::string_view kSchemaVersion = "1";
inline constexpr int kMinYear = 1800;

// Dates are days since 1970-01-01.
struct SubmissionHistory {
    std::optional<int> submitted;
    std::optional<int> accepted;
};

struct PaperRecord {
    std::string paper_id;
    std::optional<std::string> doi;
    int year = 0;
    std::optional<std::string> journal;
    std::optional<int> issue_order;
    std::vector<std::string> fields_l0;      // sorted, unique
    std::vector<std::string> fields_l1;      // sorted, unique
    std::vector<std::string> author_ids;     // input order
    std::vector<std::string> reference_ids;  // sorted, unique
    std::vector<std::string> concept_ids;    // sorted, unique
    std::optional<std::size_t> embedding_ref;
    SubmissionHistory history;
};

// Row-major float32 matrix, as stored on disk.
class EmbeddingStore {
public:
    EmbeddingStore() = default;
    explicit EmbeddingStore(std::uint32_t dim) : dim_(dim) {}

    // Throws on duplicate id, wrong length or non-finite entries.
    void add(std::string paper_id, std::span<const float> vector);

    std::uint32_t dim() const { return dim_; }
    std::size_t size() const { return ids_.size(); }
    std::optional<std::size_t> row_of(std::string_view paper_id) const;
    const std::string& id_at(std::size_t row) const { return ids_[row]; }
    std::span<const float> row(std::size_t row) const {
        return {data_.data() + row * dim_, dim_};
    }

private:
    std::uint32_t dim_ = 0;
    std::vector<std::string> ids_;
    std::vector<float> data_;
    std::unordered_map<std::string, std::size_t> row_index_;
};

// Binary layout: "SCIV1", u32 dim, u64 count, then per row a u32
// length-prefixed id followed by dim little-endian float32 values.
EmbeddingStore read_embeddings(const std::filesystem::path& path);
void write_embeddings(const std::filesystem::path& path, const EmbeddingStore& store);

struct Cohort {
    int year = 0;
    std::string field;
    std::vector<std::string> members;  // sorted paper ids, all embedded
};

struct CohortKey {
    int year = 0;
    std::string field;
    auto operator<=>(const CohortKey&) const = default;
};

// Immutable, indexed set of papers. Papers are held sorted by paper_id.
class Corpus {
public:
    Corpus() = default;

    // Validates invariants and builds indexes. Throws duplicate_key naming the id.
    static Corpus from_records(std::vector<PaperRecord> records,
                               std::shared_ptr<const EmbeddingStore> embeddings = nullptr);

    Corpus with_embeddings(std::shared_ptr<const EmbeddingStore> embeddings) const;

    std::span<const PaperRecord> papers() const { return papers_; }
    std::size_t size() const { return papers_.size(); }
    const PaperRecord* find(std::string_view paper_id) const;
    std::optional<std::size_t> index_of(std::string_view paper_id) const;

    const EmbeddingStore* embeddings() const { return embeddings_.get(); }
    std::shared_ptr<const EmbeddingStore> embeddings_ptr() const { return embeddings_; }
    std::size_t embedded_count() const;

    const std::vector<std::string>& known_fields_l1() const { return fields_l1_; }
    bool has_field(std::string_view field) const;
    int min_year() const { return min_year_; }
    int max_year() const { return max_year_; }

    // (year, field) pairs that have at least one embedded member.
    std::vector<CohortKey> cohort_keys() const;

    // One line per paper, deterministic; used for idempotency checks.
    void dump_index(std::ostream& out) const;

private:
    void build_indexes();

    friend Cohort cohort_view(const Corpus&, int, std::string_view);
    friend std::size_t field_size(const Corpus&, int, std::string_view);

    std::vector<PaperRecord> papers_;
    std::unordered_map<std::string, std::size_t> by_id_;
    std::map<CohortKey, std::size_t> field_year_counts_;
    std::map<CohortKey, std::vector<std::size_t>> cohorts_;
    std::vector<std::string> fields_l1_;
    std::shared_ptr<const EmbeddingStore> embeddings_;
    int min_year_ = 0;
    int max_year_ = 0;
};

struct RejectedLine {
    std::string file;
    std::size_t line = 0;  // 1-based
    std::string reason;
};

struct LoadResult {
    Corpus corpus;
    std::vector<RejectedLine> rejects;
};

// Parses one NDJSON record. Returns the reason on failure.
std::variant<PaperRecord, std::string> parse_paper_line(std::string_view line);

// Reads NDJSON files. A first line of the form {"schema_version": "..."} is
// treated as a header and must match schema_version.
LoadResult load_corpus(const std::vector<std::filesystem::path>& paths,
                       std::string_view schema_version = kSchemaVersion);

void write_rejects_csv(std::ostream& out, std::span<const RejectedLine> rejects);

std::string paper_to_json_line(const PaperRecord& paper);

// Removes every paper whose DOI is shared with another paper.
struct DedupeResult {
    Corpus corpus;
    std::size_t removed_count = 0;
};
DedupeResult dedupe_by_doi(const Corpus& corpus);

// Papers of that year and level-1 field that have embeddings, sorted by id.
Cohort cohort_view(const Corpus& corpus, int year, std::string_view field);

// Papers of that year tagged with the field, embedded or not.
std::size_t field_size(const Corpus& corpus, int year, std::string_view field);

}  // namespace sciline

#include "sciline/corpus.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include <json.hpp>

#include "sciline/common.hpp"

namespace sciline {

using nlohmann::json;

namespace {

void sort_unique(std::vector<std::string>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

static_assert(std::endian::native == std::endian::little,
              "embedding I/O assumes a little-endian host");

}  // namespace

// ---------------------------------------------------------------------------
// EmbeddingStore
// ---------------------------------------------------------------------------

void EmbeddingStore::add(std::string paper_id, std::span<const float> vector) {
    if (vector.size() != dim_) {
        throw Error(ErrorKind::data, "embedding for " + paper_id + " has length " +
                                         std::to_string(vector.size()) + ", expected " +
                                         std::to_string(dim_));
    }
    for (float v : vector) {
        if (!std::isfinite(v)) {
            throw Error(ErrorKind::data, "non-finite embedding entry for " + paper_id);
        }
    }
    if (row_index_.count(paper_id)) {
        throw Error(ErrorKind::duplicate_key, "duplicate embedding for paper_id " + paper_id);
    }
    row_index_.emplace(paper_id, ids_.size());
    ids_.push_back(std::move(paper_id));
    data_.insert(data_.end(), vector.begin(), vector.end());
}

std::optional<std::size_t> EmbeddingStore::row_of(std::string_view paper_id) const {
    auto it = row_index_.find(std::string(paper_id));
    if (it == row_index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

EmbeddingStore read_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::io, "cannot read embedding file " + path.string());
    }
    char magic[5];
    in.read(magic, 5);
    if (!in || std::memcmp(magic, "SCIV1", 5) != 0) {
        throw Error(ErrorKind::schema, "bad embedding magic in " + path.string());
    }
    std::uint32_t dim = 0;
    std::uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    if (!in || dim == 0) {
        throw Error(ErrorKind::schema, "truncated embedding header in " + path.string());
    }
    EmbeddingStore store(dim);
    std::vector<float> row(dim);
    for (std::uint64_t r = 0; r < count; ++r) {
        std::uint32_t len = 0;
        in.read(reinterpret_cast<char*>(&len), sizeof(len));
        std::string id(len, '\0');
        in.read(id.data(), len);
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(dim * sizeof(float)));
        if (!in) {
            throw Error(ErrorKind::schema, "truncated embedding row " + std::to_string(r) + " in " +
                                               path.string());
        }
        store.add(std::move(id), row);
    }
    return store;
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingStore& store) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::io, "cannot write " + path.string());
    }
    out.write("SCIV1", 5);
    const std::uint32_t dim = store.dim();
    const std::uint64_t count = store.size();
    out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    for (std::size_t r = 0; r < store.size(); ++r) {
        const auto& id = store.id_at(r);
        const std::uint32_t len = static_cast<std::uint32_t>(id.size());
        out.write(reinterpret_cast<const char*>(&len), sizeof(len));
        out.write(id.data(), len);
        auto row = store.row(r);
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) {
        throw Error(ErrorKind::io, "write failed for " + path.string());
    }
}

// ---------------------------------------------------------------------------
// Corpus
// ---------------------------------------------------------------------------

Corpus Corpus::from_records(std::vector<PaperRecord> records,
                            std::shared_ptr<const EmbeddingStore> embeddings) {
    std::sort(records.begin(), records.end(),
              [](const PaperRecord& a, const PaperRecord& b) { return a.paper_id < b.paper_id; });
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].paper_id == records[i - 1].paper_id) {
            throw Error(ErrorKind::duplicate_key, "duplicate paper_id: " + records[i].paper_id);
        }
    }
    for (auto& p : records) {
        if (p.paper_id.empty()) {
            throw Error(ErrorKind::data, "empty paper_id");
        }
        if (p.year < kMinYear) {
            throw Error(ErrorKind::data, "year before " + std::to_string(kMinYear) + " for " + p.paper_id);
        }
        sort_unique(p.fields_l0);
        sort_unique(p.fields_l1);
        sort_unique(p.reference_ids);
        sort_unique(p.concept_ids);
        if (std::binary_search(p.reference_ids.begin(), p.reference_ids.end(), p.paper_id)) {
            throw Error(ErrorKind::data, "paper " + p.paper_id + " references itself");
        }
    }
    Corpus c;
    c.papers_ = std::move(records);
    c.embeddings_ = std::move(embeddings);
    c.build_indexes();
    return c;
}

Corpus Corpus::with_embeddings(std::shared_ptr<const EmbeddingStore> embeddings) const {
    Corpus c;
    c.papers_ = papers_;
    c.embeddings_ = std::move(embeddings);
    c.build_indexes();
    return c;
}

void Corpus::build_indexes() {
    by_id_.clear();
    field_year_counts_.clear();
    cohorts_.clear();
    by_id_.reserve(papers_.size());
    std::set<std::string> fields;
    min_year_ = 0;
    max_year_ = 0;
    for (std::size_t i = 0; i < papers_.size(); ++i) {
        auto& p = papers_[i];
        by_id_.emplace(p.paper_id, i);
        p.embedding_ref = embeddings_ ? embeddings_->row_of(p.paper_id) : std::nullopt;
        if (i == 0 || p.year < min_year_) {
            min_year_ = p.year;
        }
        if (i == 0 || p.year > max_year_) {
            max_year_ = p.year;
        }
        for (const auto& f : p.fields_l1) {
            fields.insert(f);
            CohortKey key{p.year, f};
            ++field_year_counts_[key];
            if (p.embedding_ref) {
                cohorts_[key].push_back(i);
            }
        }
    }
    fields_l1_.assign(fields.begin(), fields.end());
}

const PaperRecord* Corpus::find(std::string_view paper_id) const {
    auto idx = index_of(paper_id);
    return idx ? &papers_[*idx] : nullptr;
}

std::optional<std::size_t> Corpus::index_of(std::string_view paper_id) const {
    auto it = by_id_.find(std::string(paper_id));
    if (it == by_id_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::size_t Corpus::embedded_count() const {
    return static_cast<std::size_t>(std::count_if(papers_.begin(), papers_.end(),
                                                  [](const PaperRecord& p) { return p.embedding_ref.has_value(); }));
}

bool Corpus::has_field(std::string_view field) const {
    return std::binary_search(fields_l1_.begin(), fields_l1_.end(), field);
}

std::vector<CohortKey> Corpus::cohort_keys() const {
    std::vector<CohortKey> keys;
    keys.reserve(cohorts_.size());
    for (const auto& [key, members] : cohorts_) {
        keys.push_back(key);
    }
    return keys;
}

void Corpus::dump_index(std::ostream& out) const {
    for (const auto& p : papers_) {
        out << paper_to_json_line(p) << '\t'
            << (p.embedding_ref ? std::to_string(*p.embedding_ref) : std::string("-")) << '\n';
    }
}

// ---------------------------------------------------------------------------
// NDJSON
// ---------------------------------------------------------------------------

namespace {

bool read_string_array(const json& obj, const char* key, std::vector<std::string>& out, std::string& err) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) {
        return true;
    }
    if (!it->is_array()) {
        err = std::string("field ") + key + " is not an array";
        return false;
    }
    for (const auto& v : *it) {
        if (!v.is_string()) {
            err = std::string("field ") + key + " has a non-string element";
            return false;
        }
        out.push_back(v.get<std::string>());
    }
    return true;
}

bool read_optional_string(const json& obj, const char* key, std::optional<std::string>& out, std::string& err) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) {
        return true;
    }
    if (!it->is_string()) {
        err = std::string("field ") + key + " is not a string";
        return false;
    }
    auto s = it->get<std::string>();
    if (!s.empty()) {
        out = std::move(s);
    }
    return true;
}

bool read_optional_date(const json& obj, const char* key, std::optional<int>& out, std::string& err) {
    std::optional<std::string> text;
    if (!read_optional_string(obj, key, text, err)) {
        return false;
    }
    if (text) {
        out = parse_iso_date(*text);
        if (!out) {
            err = std::string("field ") + key + " is not an ISO-8601 date";
            return false;
        }
    }
    return true;
}

}  // namespace

std::variant<PaperRecord, std::string> parse_paper_line(std::string_view line) {
    json obj = json::parse(line.begin(), line.end(), nullptr, false);
    if (obj.is_discarded()) {
        return std::string("malformed json");
    }
    if (!obj.is_object()) {
        return std::string("record is not an object");
    }
    PaperRecord p;
    auto id = obj.find("paper_id");
    if (id == obj.end() || !id->is_string() || id->get<std::string>().empty()) {
        return std::string("missing paper_id");
    }
    p.paper_id = id->get<std::string>();
    auto year = obj.find("year");
    if (year == obj.end() || year->is_null()) {
        return std::string("missing year");
    }
    if (!year->is_number_integer()) {
        return std::string("year is not an integer");
    }
    p.year = year->get<int>();
    if (p.year < kMinYear) {
        return std::string("year before ") + std::to_string(kMinYear);
    }
    std::string err;
    if (!read_optional_string(obj, "doi", p.doi, err) || !read_optional_string(obj, "journal", p.journal, err) ||
        !read_string_array(obj, "fields_l0", p.fields_l0, err) ||
        !read_string_array(obj, "fields_l1", p.fields_l1, err) ||
        !read_string_array(obj, "author_ids", p.author_ids, err) ||
        !read_string_array(obj, "reference_ids", p.reference_ids, err) ||
        !read_string_array(obj, "concept_ids", p.concept_ids, err) ||
        !read_optional_date(obj, "submitted", p.history.submitted, err) ||
        !read_optional_date(obj, "accepted", p.history.accepted, err)) {
        return err;
    }
    if (auto order = obj.find("issue_order"); order != obj.end() && !order->is_null()) {
        if (!order->is_number_integer()) {
            return std::string("issue_order is not an integer");
        }
        p.issue_order = order->get<int>();
    }
    sort_unique(p.fields_l0);
    sort_unique(p.fields_l1);
    sort_unique(p.reference_ids);
    sort_unique(p.concept_ids);
    if (std::binary_search(p.reference_ids.begin(), p.reference_ids.end(), p.paper_id)) {
        return std::string("self reference");
    }
    return p;
}

std::string paper_to_json_line(const PaperRecord& p) {
    // ordered_json keeps the documented key order
    nlohmann::ordered_json obj;
    obj["paper_id"] = p.paper_id;
    obj["doi"] = p.doi ? json(*p.doi) : json(nullptr);
    obj["year"] = p.year;
    obj["journal"] = p.journal ? json(*p.journal) : json(nullptr);
    obj["fields_l0"] = p.fields_l0;
    obj["fields_l1"] = p.fields_l1;
    obj["author_ids"] = p.author_ids;
    obj["reference_ids"] = p.reference_ids;
    obj["concept_ids"] = p.concept_ids;
    obj["submitted"] = p.history.submitted ? json(format_iso_date(*p.history.submitted)) : json(nullptr);
    obj["accepted"] = p.history.accepted ? json(format_iso_date(*p.history.accepted)) : json(nullptr);
    if (p.issue_order) {
        obj["issue_order"] = *p.issue_order;
    }
    return obj.dump();
}

LoadResult load_corpus(const std::vector<std::filesystem::path>& paths, std::string_view schema_version) {
    std::vector<PaperRecord> records;
    LoadResult result;
    for (const auto& path : paths) {
        std::ifstream in(path);
        if (!in) {
            throw Error(ErrorKind::io, "cannot read corpus file " + path.string());
        }
        std::string line;
        std::size_t line_no = 0;
        bool first_record = true;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') {
                line.pop_back();
            }
            if (line.find_first_not_of(" \t") == std::string::npos) {
                continue;
            }
            if (first_record) {
                first_record = false;
                json header = json::parse(line, nullptr, false);
                if (!header.is_discarded() && header.is_object() && header.contains("schema_version") &&
                    !header.contains("paper_id")) {
                    const auto& v = header["schema_version"];
                    std::string found = v.is_string() ? v.get<std::string>() : v.dump();
                    if (found != schema_version) {
                        throw Error(ErrorKind::schema, "schema version mismatch in " + path.string() +
                                                           ": file has " + found + ", expected " +
                                                           std::string(schema_version));
                    }
                    continue;
                }
            }
            auto parsed = parse_paper_line(line);
            if (auto* reason = std::get_if<std::string>(&parsed)) {
                result.rejects.push_back({path.string(), line_no, *reason});
            } else {
                records.push_back(std::move(std::get<PaperRecord>(parsed)));
            }
        }
    }
    result.corpus = Corpus::from_records(std::move(records));
    return result;
}

void write_rejects_csv(std::ostream& out, std::span<const RejectedLine> rejects) {
    CsvWriter csv(out);
    csv.row({"line", "reason"});
    // the columns are fixed, so several input files are told apart inside the reason
    const bool many = std::any_of(rejects.begin(), rejects.end(),
                                  [&](const RejectedLine& r) { return r.file != rejects.front().file; });
    for (const auto& r : rejects) {
        csv.row({std::to_string(r.line), many ? r.file + ": " + r.reason : r.reason});
    }
}

DedupeResult dedupe_by_doi(const Corpus& corpus) {
    std::unordered_map<std::string, std::size_t> doi_counts;
    for (const auto& p : corpus.papers()) {
        if (p.doi) {
            ++doi_counts[*p.doi];
        }
    }
    std::vector<PaperRecord> kept;
    kept.reserve(corpus.size());
    DedupeResult result;
    for (const auto& p : corpus.papers()) {
        if (p.doi && doi_counts[*p.doi] > 1) {
            ++result.removed_count;
        } else {
            kept.push_back(p);
        }
    }
    result.corpus = Corpus::from_records(std::move(kept), corpus.embeddings_ptr());
    return result;
}

Cohort cohort_view(const Corpus& corpus, int year, std::string_view field) {
    if (!corpus.has_field(field)) {
        throw Error(ErrorKind::unknown_key, "unknown field tag: " + std::string(field));
    }
    Cohort cohort{year, std::string(field), {}};
    auto it = corpus.cohorts_.find(CohortKey{year, std::string(field)});
    if (it != corpus.cohorts_.end()) {
        for (std::size_t idx : it->second) {
            cohort.members.push_back(corpus.papers_[idx].paper_id);
        }
    }
    return cohort;
}

std::size_t field_size(const Corpus& corpus, int year, std::string_view field) {
    if (!corpus.has_field(field)) {
        throw Error(ErrorKind::unknown_key, "unknown field tag: " + std::string(field));
    }
    auto it = corpus.field_year_counts_.find(CohortKey{year, std::string(field)});
    return it == corpus.field_year_counts_.end() ? 0 : it->second;
}

}  // namespace sciline

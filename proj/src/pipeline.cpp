#include "sciline/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>
#include <variant>

#include <CLI11.hpp>
#include <json.hpp>
#include <toml.hpp>

#include "sciline/common.hpp"
#include "sciline/corpus.hpp"
#include "sciline/disruption.hpp"
#include "sciline/regress.hpp"
#include "sciline/svg.hpp"

namespace sciline {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Config keys shared by the TOML loader and the command line
// ---------------------------------------------------------------------------

namespace {

enum class Kind { integer, real, boolean, text, text_list, path, path_list };

using Value = std::variant<std::int64_t, double, bool, std::string, std::vector<std::string>>;

template <class C>
struct Key {
    std::string name;  // "section.key", or "key" at top level
    std::string flag;  // empty: file only
    Kind kind;
    std::string help;
    std::function<void(C&, const Value&)> set;
};

std::int64_t as_int(const Value& v) { return std::get<std::int64_t>(v); }
double as_real(const Value& v) { return std::get<double>(v); }
bool as_bool(const Value& v) { return std::get<bool>(v); }
const std::string& as_text(const Value& v) { return std::get<std::string>(v); }
const std::vector<std::string>& as_list(const Value& v) { return std::get<std::vector<std::string>>(v); }

std::vector<std::string> split_commas(const std::vector<std::string>& items) {
    std::vector<std::string> out;
    for (const auto& item : items) {
        std::size_t start = 0;
        while (start <= item.size()) {
            const auto comma = item.find(',', start);
            const auto end = comma == std::string::npos ? item.size() : comma;
            if (end > start) {
                out.push_back(item.substr(start, end - start));
            }
            if (comma == std::string::npos) {
                break;
            }
            start = comma + 1;
        }
    }
    return out;
}

int to_int(const Value& v, const std::string& key) {
    const auto x = as_int(v);
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
        throw Error(ErrorKind::config, key + ": value out of range");
    }
    return static_cast<int>(x);
}

std::uint64_t to_u64(const Value& v, const std::string& key) {
    const auto x = as_int(v);
    if (x < 0) {
        throw Error(ErrorKind::config, key + ": must be nonnegative");
    }
    return static_cast<std::uint64_t>(x);
}

#define KEY(C, name, flag, kind, help, body) \
    Key<C> { name, flag, Kind::kind, help, [](C & c, const Value& v) { body; } }

const std::vector<Key<PipelineConfig>>& pipeline_keys() {
    using P = PipelineConfig;
    static const std::vector<Key<P>> keys = {
        KEY(P, "input.corpus", "--corpus", path_list, "corpus NDJSON files",
            c.corpus.assign(as_list(v).begin(), as_list(v).end())),
        KEY(P, "input.embeddings", "--embeddings", path, "embedding binary", c.embeddings = as_text(v)),
        KEY(P, "input.contexts", "--contexts", path, "citation context NDJSON", c.contexts = as_text(v)),
        KEY(P, "input.schema_version", "--schema-version", text, "expected corpus schema version",
            c.schema_version = as_text(v)),
        KEY(P, "input.dedupe", "--dedupe", boolean, "drop every paper whose DOI is shared", c.dedupe = as_bool(v)),
        KEY(P, "output.dir", "--out-dir", path, "output directory", c.out_dir = as_text(v)),
        KEY(P, "output.scores", "--scores-out", path, "stylization score CSV", c.scores_out = as_text(v)),
        KEY(P, "output.tables", "--tables-dir", path, "regression table directory", c.tables_dir = as_text(v)),
        KEY(P, "output.svg", "--svg", path, "plot directory", c.svg_dir = as_text(v)),
        KEY(P, "run.seed", "--seed", integer, "global seed", c.seed = to_u64(v, "run.seed")),
        KEY(P, "run.threads", "--threads", integer, "worker cap, 0 = all cores",
            c.threads = static_cast<unsigned>(to_u64(v, "run.threads"))),
        KEY(P, "run.stages", "--stages", text_list, "stages to run", c.stages = as_list(v)),
        KEY(P, "stylize.variants", "--variant", text_list, "knn5, knn10, pct5",
            c.variants.clear();
            for (const auto& s : as_list(v)) c.variants.push_back(parse_variant(s))),
        KEY(P, "stylize.removal_rank", "--removal-rank", integer, "principal directions removed",
            c.rotation.removal_rank = to_int(v, "stylize.removal_rank")),
        KEY(P, "stylize.center", "--center", boolean, "subtract the cohort mean", c.rotation.center = as_bool(v)),
        KEY(P, "stylize.include_self_in_mean", "--self-in-mean", boolean, "focal vector joins the cohort mean",
            c.rotation.include_self_in_mean = as_bool(v)),
        KEY(P, "disrupt.min_citations", "--min-citations", integer, "minimum citations for disruption rows",
            c.min_citations = to_int(v, "disrupt.min_citations")),
        KEY(P, "disrupt.cd_prime_literal", "--cd-prime-literal", boolean, "dispersion of D_j - C_j as computed",
            c.cd_prime_literal = as_bool(v)),
        KEY(P, "disrupt.damping", "--damping", real, "pagerank damping", c.damping = as_real(v)),
        KEY(P, "recombine.cutoff_year", "--cutoff-year", integer, "baseline ends before this year",
            c.cutoff_year = to_int(v, "recombine.cutoff_year")),
        KEY(P, "recombine.threshold", "--threshold", real, "remote distance threshold", c.threshold = as_real(v)),
        KEY(P, "recombine.window", "--window", integer, "embedding window in years",
            c.walk.window_years = to_int(v, "recombine.window")),
        KEY(P, "recombine.dim", "--dim", integer, "concept embedding dimension",
            c.walk.dim = to_int(v, "recombine.dim")),
        KEY(P, "recombine.walks_per_node", "--walks", integer, "walks per concept",
            c.walk.walks_per_node = to_int(v, "recombine.walks_per_node")),
        KEY(P, "recombine.walk_length", "--walk-length", integer, "walk length",
            c.walk.walk_length = to_int(v, "recombine.walk_length")),
        KEY(P, "recombine.context", "--context", integer, "skip-gram context size",
            c.walk.context = to_int(v, "recombine.context")),
        KEY(P, "recombine.seed", "--walk-seed", integer, "walk seed, default the global seed",
            c.walk_seed = to_u64(v, "recombine.seed")),
        KEY(P, "recombine.exclude_without_combos", "--exclude-without-combos", boolean,
            "drop papers without new combinations", c.exclude_without_combos = as_bool(v)),
        KEY(P, "reception.inclusive_windows", "--inclusive-windows", boolean, "C5/C10 include year +5/+10",
            c.reception.inclusive_windows = as_bool(v)),
        KEY(P, "reception.min_days", "--min-days", integer, "shortest kept turnaround",
            c.reception.turnaround.min_days = to_int(v, "reception.min_days")),
        KEY(P, "reception.max_days", "--max-days", integer, "longest kept turnaround",
            c.reception.turnaround.max_days = to_int(v, "reception.max_days")),
        KEY(P, "reception.include_outliers", "--include-outliers", boolean, "keep turnaround outliers",
            c.reception.turnaround.include_outliers = as_bool(v)),
        KEY(P, "twins.min_cocite", "--min-cocite", integer, "minimum co-citation count",
            c.twins.min_cocite = static_cast<std::size_t>(to_u64(v, "twins.min_cocite"))),
        KEY(P, "twins.refsim_threshold", "--refsim-threshold", real, "minimum reference overlap",
            c.twins.refsim_threshold = as_real(v)),
        KEY(P, "twins.sentence_gap", "--sentence-gap", integer, "adjacent sentence distance",
            c.sentence_gap = to_int(v, "twins.sentence_gap")),
        KEY(P, "twins.tolerance", "--tolerance", real, "score difference tolerance", c.tolerance = as_real(v)),
        KEY(P, "regress.responses", "--response", text_list, "c5, c10, citation_count, cd, turnaround_days",
            c.responses = as_list(v)),
        KEY(P, "regress.model", "--model", text, "auto, poisson or ols", c.model = as_text(v)),
        KEY(P, "regress.fe", "--fe", text_list, "fixed effects: year, field", c.fe = as_list(v)),
    };
    return keys;
}

const std::vector<Key<SynthConfig>>& synth_keys() {
    using S = SynthConfig;
    static const std::vector<Key<S>> keys = {
        KEY(S, "seed", "", integer, "seed", c.seed = to_u64(v, "seed")),
        KEY(S, "start_year", "--start-year", integer, "first year", c.start_year = to_int(v, "start_year")),
        KEY(S, "n_years", "--n-years", integer, "number of years", c.n_years = to_int(v, "n_years")),
        KEY(S, "n_fields", "--n-fields", integer, "number of fields", c.n_fields = to_int(v, "n_fields")),
        KEY(S, "papers_per_year", "--papers-per-year", integer, "papers per field in the first year",
            c.papers_per_year = to_int(v, "papers_per_year")),
        KEY(S, "growth_rate", "--growth-rate", real, "yearly growth", c.growth_rate = as_real(v)),
        KEY(S, "field_size_jitter", "--field-size-jitter", real, "moves papers between fields within a year",
            c.field_size_jitter = as_real(v)),
        KEY(S, "dim", "--dim", integer, "embedding dimension", c.dim = to_int(v, "dim")),
        KEY(S, "topics_per_field", "--topics-per-field", integer, "mixture components per field",
            c.topics_per_field = to_int(v, "topics_per_field")),
        KEY(S, "calibrate", "--calibrate", boolean, "calibrate spread to the target scores",
            c.calibrate = as_bool(v)),
        KEY(S, "target_start", "--target-start", real, "expected mean score in the first year",
            c.target_start = as_real(v)),
        KEY(S, "target_slope", "--target-slope", real, "expected yearly change of the mean score",
            c.target_slope = as_real(v)),
        KEY(S, "sigma_start", "--sigma-start", real, "spread in the first year (uncalibrated)",
            c.sigma_start = as_real(v)),
        KEY(S, "sigma_end", "--sigma-end", real, "spread in the last year (uncalibrated)", c.sigma_end = as_real(v)),
        KEY(S, "mean_references", "--mean-references", real, "mean reference list length",
            c.mean_references = as_real(v)),
        KEY(S, "recency_decay", "--recency-decay", real, "citation age decay", c.recency_decay = as_real(v)),
        KEY(S, "preferential_attachment", "--preferential-attachment", real, "indegree exponent",
            c.preferential_attachment = as_real(v)),
        KEY(S, "stylized_citation_factor", "--stylized-citation-factor", real, "citation fitness of stylized papers",
            c.stylized_citation_factor = as_real(v)),
        KEY(S, "review_base_days", "--review-base-days", real, "median review lag",
            c.review_base_days = as_real(v)),
        KEY(S, "review_spread", "--review-spread", real, "log-normal spread of the lag",
            c.review_spread = as_real(v)),
        KEY(S, "stylized_review_factor", "--stylized-review-factor", real, "lag multiplier for stylized papers",
            c.stylized_review_factor = as_real(v)),
        KEY(S, "review_outlier_fraction", "--review-outlier-fraction", real, "lags outside the kept range",
            c.review_outlier_fraction = as_real(v)),
        KEY(S, "concepts_per_field", "--concepts-per-field", integer, "concept pool per field",
            c.concepts_per_field = to_int(v, "concepts_per_field")),
        KEY(S, "concepts_per_paper", "--concepts-per-paper", integer, "concept draws per paper",
            c.concepts_per_paper = to_int(v, "concepts_per_paper")),
        KEY(S, "cross_field_prob", "--cross-field-prob", real, "chance a concept comes from another field",
            c.cross_field_prob = as_real(v)),
        KEY(S, "stylized_cross_factor", "--stylized-cross-factor", real, "cross-field multiplier when stylized",
            c.stylized_cross_factor = as_real(v)),
        KEY(S, "twin_count", "--twin-count", integer, "injected twin pairs", c.twin_count = to_int(v, "twin_count")),
        KEY(S, "twin_noise", "--twin-noise", real, "twin perturbation relative to the spread",
            c.twin_noise = as_real(v)),
        KEY(S, "twin_b2b_prob", "--twin-b2b-prob", real, "chance twins sit back to back",
            c.twin_b2b_prob = as_real(v)),
        KEY(S, "twin_contexts", "--twin-contexts", integer, "co-citing papers per twin pair",
            c.twin_contexts = to_int(v, "twin_contexts")),
        KEY(S, "noise_contexts", "--noise-contexts", integer, "unrelated citation contexts",
            c.noise_contexts = to_int(v, "noise_contexts")),
        KEY(S, "journals_per_field", "--journals-per-field", integer, "journals per field",
            c.journals_per_field = to_int(v, "journals_per_field")),
    };
    return keys;
}

#undef KEY

template <class C>
void apply_value(const Key<C>& key, C& config, const Value& v) {
    try {
        key.set(config, v);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::config) {
            throw;
        }
        throw Error(ErrorKind::config, key.name + ": " + e.what());
    }
}

template <class C>
Value from_toml(const Key<C>& key, const toml::node& node, const fs::path& base) {
    auto bad = [&](const char* what) { return Error(ErrorKind::config, key.name + ": expected " + what); };
    auto resolve = [&](const std::string& p) {
        const fs::path path(p);
        return (path.is_relative() ? base / path : path).lexically_normal().string();
    };
    auto strings = [&]() {
        std::vector<std::string> out;
        if (auto s = node.value<std::string>()) {
            out = split_commas({*s});
        } else if (const auto* arr = node.as_array()) {
            for (const auto& item : *arr) {
                auto s2 = item.value<std::string>();
                if (!s2) {
                    throw bad("an array of strings");
                }
                out.push_back(*s2);
            }
        } else {
            throw bad("an array of strings");
        }
        return out;
    };
    switch (key.kind) {
        case Kind::integer:
            if (!node.is_integer()) throw bad("an integer");
            return *node.value<std::int64_t>();
        case Kind::real:
            if (!node.is_number()) throw bad("a number");
            return *node.value<double>();
        case Kind::boolean:
            if (!node.is_boolean()) throw bad("true or false");
            return *node.value<bool>();
        case Kind::text:
            if (!node.is_string()) throw bad("a string");
            return *node.value<std::string>();
        case Kind::path:
            if (!node.is_string()) throw bad("a path string");
            return resolve(*node.value<std::string>());
        case Kind::text_list:
            return strings();
        case Kind::path_list: {
            auto list = strings();
            for (auto& p : list) p = resolve(p);
            return list;
        }
    }
    throw bad("a value");
}

template <class C>
void load_toml(const fs::path& path, C& config, const std::vector<Key<C>>& keys) {
    if (!fs::exists(path)) {
        throw Error(ErrorKind::config, "config file not found: " + path.string());
    }
    toml::table table;
    try {
        table = toml::parse_file(path.string());
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << path.string() << ':' << e.source().begin.line << ": " << e.description();
        throw Error(ErrorKind::config, msg.str());
    }
    const fs::path base = path.parent_path();
    auto find = [&](const std::string& name) -> const Key<C>* {
        for (const auto& k : keys) {
            if (k.name == name) return &k;
        }
        return nullptr;
    };
    std::function<void(const toml::table&, const std::string&)> walk = [&](const toml::table& t,
                                                                           const std::string& prefix) {
        for (const auto& [k, node] : t) {
            const std::string name = prefix.empty() ? std::string(k.str()) : prefix + "." + std::string(k.str());
            if (const auto* sub = node.as_table()) {
                walk(*sub, name);
                continue;
            }
            const auto* key = find(name);
            if (!key) {
                throw Error(ErrorKind::config, path.string() + ": unknown key '" + name + "'");
            }
            apply_value(*key, config, from_toml(*key, node, base));
        }
    };
    walk(table, "");
}

Value from_text(Kind kind, const std::string& flag, const std::string& text) {
    auto bad = [&] { return Error(ErrorKind::config, flag + ": invalid value '" + text + "'"); };
    switch (kind) {
        case Kind::integer: {
            std::int64_t x = 0;
            auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), x);
            if (ec != std::errc() || p != text.data() + text.size()) throw bad();
            return x;
        }
        case Kind::real: {
            double x = 0;
            auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), x);
            if (ec != std::errc() || p != text.data() + text.size()) throw bad();
            return x;
        }
        default:
            return text;
    }
}

// Holds the command-line side of one key until parsing is done.
template <class C>
struct Binding {
    const Key<C>* key = nullptr;
    CLI::Option* option = nullptr;
    std::string text;
    std::vector<std::string> list;
    bool flag = false;
};

template <class C>
void bind_keys(CLI::App& app, const std::vector<Key<C>>& keys, std::deque<Binding<C>>& out) {
    for (const auto& key : keys) {
        if (key.flag.empty()) {
            continue;
        }
        auto& b = out.emplace_back();
        b.key = &key;
        const std::string help = key.help + " [" + key.name + "]";
        switch (key.kind) {
            case Kind::boolean:
                b.option = app.add_flag(key.flag + ",!--no-" + key.flag.substr(2), b.flag, help);
                break;
            case Kind::text_list:
            case Kind::path_list:
                b.option = app.add_option(key.flag, b.list, help)->delimiter(',');
                break;
            default:
                b.option = app.add_option(key.flag, b.text, help);
        }
    }
}

template <class C>
void apply_bindings(const std::deque<Binding<C>>& bindings, C& config) {
    for (const auto& b : bindings) {
        if (b.option->count() == 0) {
            continue;
        }
        switch (b.key->kind) {
            case Kind::boolean:
                apply_value(*b.key, config, Value{b.flag});
                break;
            case Kind::text_list:
            case Kind::path_list:
                apply_value(*b.key, config, Value{split_commas(b.list)});
                break;
            default:
                apply_value(*b.key, config, from_text(b.key->kind, b.key->flag, b.text));
        }
    }
}

// ---------------------------------------------------------------------------
// Small file helpers
// ---------------------------------------------------------------------------

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t col(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        throw Error(ErrorKind::data, "missing column " + std::string(name));
    }
};

CsvTable read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::io, "cannot read " + path.string());
    }
    CsvTable t;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        auto fields = csv_split(line);
        if (t.header.empty()) {
            t.header = std::move(fields);
        } else {
            t.rows.push_back(std::move(fields));
        }
    }
    return t;
}

std::optional<double> parse_number(const std::string& s) {
    if (s == "NA" || s.empty()) {
        return std::nullopt;
    }
    double x = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc() || p != s.data() + s.size()) {
        throw Error(ErrorKind::data, "not a number: " + s);
    }
    return x;
}

int parse_int(const std::string& s) {
    int x = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc() || p != s.data() + s.size()) {
        throw Error(ErrorKind::data, "not an integer: " + s);
    }
    return x;
}

std::string flag(bool b) { return b ? "true" : "false"; }

std::vector<std::string> split_char(const std::string& s, char sep) {
    std::vector<std::string> out;
    if (s.empty()) {
        return out;
    }
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Stage machinery
// ---------------------------------------------------------------------------

struct State {
    const PipelineConfig& cfg;
    std::optional<Corpus> corpus;
    std::vector<fs::path> corpus_inputs;
    std::optional<CitationGraph> graph;
    std::optional<std::vector<StylizationEntry>> entries;
    fs::path entries_source;
    std::optional<std::vector<PaperScore>> primary;
    std::optional<std::vector<DisruptionProfile>> profiles;
    std::unordered_map<std::string, std::string> hash_cache;

    explicit State(const PipelineConfig& c) : cfg(c) {}
};

class StageContext {
public:
    StageContext(State& state, StageRecord& record) : st(state), rec(record) {}

    void input(const fs::path& path) {
        const auto key = path.string();
        auto it = st.hash_cache.find(key);
        if (it == st.hash_cache.end()) {
            it = st.hash_cache.emplace(key, hex64(hash_file(path))).first;
        }
        // files from earlier stages are named like outputs, so moving out_dir keeps the manifest
        const auto rel = path.lexically_normal().lexically_relative(st.cfg.out_dir.lexically_normal());
        const bool inside = !rel.empty() && *rel.begin() != "..";
        rec.inputs[inside ? rel.generic_string() : key] = it->second;
    }

    fs::path out(const std::string& name) const { return st.cfg.out_dir / name; }

    std::ofstream open(const fs::path& path) {
        if (path.has_parent_path()) {
            fs::create_directories(path.parent_path());
        }
        std::ofstream f(path, std::ios::binary);
        if (!f) {
            throw Error(ErrorKind::io, "cannot write " + path.string());
        }
        const auto rel = path.lexically_relative(st.cfg.out_dir);
        const bool inside = !rel.empty() && rel.begin()->string() != "..";
        rec.outputs.push_back(inside ? rel.generic_string() : path.generic_string());
        return f;
    }

    void csv(const fs::path& path, const std::function<void(CsvWriter&)>& body) {
        auto f = open(path);
        CsvWriter w(f);
        w.comment("seed=" + std::to_string(st.cfg.seed));
        body(w);
        if (!f) {
            throw Error(ErrorKind::io, "write failed: " + path.string());
        }
    }

    void text(const fs::path& path, const std::string& body) {
        auto f = open(path);
        f << body;
    }

    const Corpus& corpus() {
        if (!st.corpus) {
            auto loaded = load_corpus(st.cfg.corpus, st.cfg.schema_version);
            Corpus c = std::move(loaded.corpus);
            if (st.cfg.dedupe) {
                c = dedupe_by_doi(c).corpus;
            }
            if (st.cfg.embeddings) {
                c = c.with_embeddings(std::make_shared<EmbeddingStore>(read_embeddings(*st.cfg.embeddings)));
            }
            st.corpus = std::move(c);
            st.corpus_inputs = st.cfg.corpus;
            if (st.cfg.embeddings) {
                st.corpus_inputs.push_back(*st.cfg.embeddings);
            }
        }
        for (const auto& p : st.corpus_inputs) {
            input(p);
        }
        return *st.corpus;
    }

    const CitationGraph& graph() {
        const auto& c = corpus();
        if (!st.graph) {
            st.graph = CitationGraph::from_corpus(c);
        }
        return *st.graph;
    }

    fs::path scores_path() const { return st.cfg.scores_out.value_or(out("scores.csv")); }

    const std::vector<StylizationEntry>& entries() {
        if (!st.entries) {
            const auto path = scores_path();
            if (!fs::exists(path)) {
                throw Error(ErrorKind::data, path.string() + " not found; run the stylize stage first");
            }
            const auto t = read_csv(path);
            const auto c_id = t.col("paper_id"), c_var = t.col("variant"), c_year = t.col("year"),
                       c_field = t.col("field"), c_score = t.col("score"), c_mean = t.col("cohort_mean"),
                       c_label = t.col("label"), c_nb = t.col("neighbors");
            std::vector<StylizationEntry> es;
            for (const auto& r : t.rows) {
                StylizationEntry e;
                e.paper_id = r.at(c_id);
                e.variant = parse_variant(r.at(c_var));
                e.cohort_year = parse_int(r.at(c_year));
                e.cohort_field = r.at(c_field);
                e.score = parse_number(r.at(c_score)).value_or(0.0);
                e.cohort_mean = parse_number(r.at(c_mean)).value_or(0.0);
                e.label = r.at(c_label) == "stylized" ? Label::stylized : Label::popularized;
                e.neighbor_ids = split_char(r.at(c_nb), ';');
                es.push_back(std::move(e));
            }
            st.entries = std::move(es);
            st.entries_source = path;
        }
        if (!st.entries_source.empty()) {
            input(st.entries_source);
        }
        return *st.entries;
    }

    const std::vector<PaperScore>& primary() {
        if (!st.primary) {
            const Variant v = st.cfg.variants.front();
            std::vector<StylizationEntry> mine;
            for (const auto& e : entries()) {
                if (e.variant == v) mine.push_back(e);
            }
            st.primary = paper_scores(mine);
        } else {
            entries();  // records the input
        }
        return *st.primary;
    }

    std::unordered_map<std::string, Label> labels() {
        std::unordered_map<std::string, Label> out;
        for (const auto& p : primary()) out[p.paper_id] = p.label;
        return out;
    }

    std::unordered_map<std::string, double> scores() {
        std::unordered_map<std::string, double> out;
        for (const auto& p : primary()) out[p.paper_id] = p.score;
        return out;
    }

    const std::vector<DisruptionProfile>& profiles() {
        if (!st.profiles) {
            st.profiles = all_profiles(graph(), st.cfg.cd_prime_literal);
        }
        return *st.profiles;
    }

    State& st;
    StageRecord& rec;
};

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

ojson stage_params(const PipelineConfig& c, const std::string& stage) {
    ojson p;
    p["seed"] = c.seed;
    if (stage == "ingest") {
        p["schema_version"] = c.schema_version;
        p["dedupe"] = c.dedupe;
    } else if (stage == "stylize") {
        std::vector<std::string> vs;
        for (auto v : c.variants) vs.emplace_back(to_string(v));
        p["variants"] = vs;
        p["removal_rank"] = c.rotation.removal_rank;
        p["center"] = c.rotation.center;
        p["include_self_in_mean"] = c.rotation.include_self_in_mean;
    } else if (stage == "disrupt") {
        p["min_citations"] = c.min_citations;
        p["cd_prime_literal"] = c.cd_prime_literal;
        p["damping"] = c.damping;
    } else if (stage == "recombine") {
        p["cutoff_year"] = c.cutoff_year ? ojson(*c.cutoff_year) : ojson(nullptr);
        p["threshold"] = c.threshold;
        p["window"] = c.walk.window_years;
        p["dim"] = c.walk.dim;
        p["walks_per_node"] = c.walk.walks_per_node;
        p["walk_length"] = c.walk.walk_length;
        p["context"] = c.walk.context;
        p["walk_seed"] = c.walk_seed.value_or(c.seed);
        p["exclude_without_combos"] = c.exclude_without_combos;
    } else if (stage == "reception") {
        p["inclusive_windows"] = c.reception.inclusive_windows;
        p["min_days"] = c.reception.turnaround.min_days;
        p["max_days"] = c.reception.turnaround.max_days;
        p["include_outliers"] = c.reception.turnaround.include_outliers;
    } else if (stage == "twins") {
        p["min_cocite"] = c.twins.min_cocite;
        p["refsim_threshold"] = c.twins.refsim_threshold;
        p["sentence_gap"] = c.sentence_gap;
        p["tolerance"] = c.tolerance;
    } else if (stage == "regress") {
        p["responses"] = c.responses;
        p["model"] = c.model;
        p["fe"] = c.fe;
    }
    return p;
}

void stage_ingest(StageContext& cx) {
    const auto& cfg = cx.st.cfg;
    auto loaded = load_corpus(cfg.corpus, cfg.schema_version);
    const std::size_t loaded_count = loaded.corpus.size();
    Corpus c = std::move(loaded.corpus);
    std::size_t removed = 0;
    if (cfg.dedupe) {
        auto d = dedupe_by_doi(c);
        removed = d.removed_count;
        c = std::move(d.corpus);
    }
    std::size_t rows = 0;
    if (cfg.embeddings) {
        auto store = std::make_shared<EmbeddingStore>(read_embeddings(*cfg.embeddings));
        rows = store->size();
        c = c.with_embeddings(store);
    }
    cx.st.corpus = std::move(c);
    cx.st.corpus_inputs = cfg.corpus;
    if (cfg.embeddings) {
        cx.st.corpus_inputs.push_back(*cfg.embeddings);
    }
    const auto& corpus = cx.corpus();
    const auto& graph = cx.graph();

    cx.csv(cx.out("rejects.csv"), [&](CsvWriter& w) {
        w.row({"file", "line", "reason"});
        for (const auto& r : loaded.rejects) {
            w.row({r.file, std::to_string(r.line), r.reason});
        }
    });
    cx.csv(cx.out("ingest.csv"), [&](CsvWriter& w) {
        w.row({"metric", "value"});
        w.row({"papers_loaded", std::to_string(loaded_count)});
        w.row({"rejected_lines", std::to_string(loaded.rejects.size())});
        w.row({"doi_removed", std::to_string(removed)});
        w.row({"papers", std::to_string(corpus.size())});
        w.row({"embedding_rows", std::to_string(rows)});
        w.row({"embedded_papers", std::to_string(corpus.embedded_count())});
        w.row({"citation_edges", std::to_string(graph.edge_count())});
        w.row({"unresolved_references", std::to_string(graph.unresolved_references())});
        w.row({"fields_l1", std::to_string(corpus.known_fields_l1().size())});
        w.row({"min_year", std::to_string(corpus.min_year())});
        w.row({"max_year", std::to_string(corpus.max_year())});
    });
}

void stage_stylize(StageContext& cx) {
    const auto& cfg = cx.st.cfg;
    const auto& corpus = cx.corpus();
    StylizeOptions opt;
    opt.variants = cfg.variants;
    opt.rotation = cfg.rotation;
    auto result = stylize_corpus(corpus, opt);
    cx.st.entries = result.entries;
    cx.st.entries_source.clear();
    cx.st.primary.reset();

    cx.csv(cx.scores_path(), [&](CsvWriter& w) {
        w.row({"paper_id", "variant", "year", "field", "score", "cohort_mean", "label", "neighbors"});
        for (const auto& e : result.entries) {
            w.row({e.paper_id, std::string(to_string(e.variant)), std::to_string(e.cohort_year), e.cohort_field,
                   format_double(e.score), format_double(e.cohort_mean), std::string(to_string(e.label)),
                   join(e.neighbor_ids, ";")});
        }
    });
    const auto ps = paper_scores(result.entries);
    cx.csv(cx.out("paper_scores.csv"), [&](CsvWriter& w) {
        w.row({"paper_id", "variant", "year", "score", "reference_mean", "label", "n_cohorts"});
        for (const auto& p : ps) {
            w.row({p.paper_id, std::string(to_string(p.variant)), std::to_string(p.year), format_double(p.score),
                   format_double(p.reference_mean), std::string(to_string(p.label)), std::to_string(p.n_cohorts)});
        }
    });
    std::vector<std::pair<Variant, std::vector<DecadeRow>>> decades;
    for (auto v : cfg.variants) {
        std::vector<StylizationEntry> mine;
        for (const auto& e : result.entries) {
            if (e.variant == v) mine.push_back(e);
        }
        decades.emplace_back(v, mine.empty() ? std::vector<DecadeRow>{} : decade_distribution(mine));
    }
    cx.csv(cx.out("decades.csv"), [&](CsvWriter& w) {
        w.row({"variant", "decade", "count", "mean"});
        for (const auto& [v, rows] : decades) {
            for (const auto& d : rows) {
                w.row({std::string(to_string(v)), std::to_string(d.decade), std::to_string(d.count),
                       format_double(d.mean)});
            }
        }
    });
    cx.csv(cx.out("decade_fields.csv"), [&](CsvWriter& w) {
        w.row({"variant", "decade", "field", "mean"});
        for (const auto& [v, rows] : decades) {
            for (const auto& d : rows) {
                for (const auto& [field, m] : d.field_means) {
                    w.row({std::string(to_string(v)), std::to_string(d.decade), field, format_double(m)});
                }
            }
        }
    });
    cx.csv(cx.out("decade_histogram.csv"), [&](CsvWriter& w) {
        w.row({"variant", "decade", "bin_lo", "bin_hi", "count"});
        for (const auto& [v, rows] : decades) {
            for (const auto& d : rows) {
                for (std::size_t b = 0; b < d.histogram.size(); ++b) {
                    if (d.histogram[b] == 0) continue;
                    w.row({std::string(to_string(v)), std::to_string(d.decade), format_fixed(b * kHistogramWidth, 2),
                           format_fixed((b + 1) * kHistogramWidth, 2), std::to_string(d.histogram[b])});
                }
            }
        }
    });
    cx.csv(cx.out("stylize_summary.csv"), [&](CsvWriter& w) {
        w.row({"metric", "value"});
        w.row({"cohorts_scored", std::to_string(result.cohorts_scored)});
        w.row({"small_cohorts", std::to_string(result.small_cohorts)});
        w.row({"skipped_cohorts", std::to_string(result.skipped_cohorts)});
        w.row({"degenerate_rows", std::to_string(result.degenerate_rows)});
        w.row({"unembedded_papers", std::to_string(result.unembedded_papers)});
        w.row({"entries", std::to_string(result.entries.size())});
    });
}

void stage_disrupt(StageContext& cx) {
    const auto& cfg = cx.st.cfg;
    const auto& graph = cx.graph();
    const auto& profiles = cx.profiles();
    const auto labels = cx.labels();
    std::vector<DisruptionProfile> kept;
    for (std::uint32_t n = 0; n < graph.size(); ++n) {
        if (static_cast<int>(graph.citers(n).size()) >= cfg.min_citations) {
            kept.push_back(profiles[n]);
        }
    }
    cx.csv(cx.out("disruption.csv"), [&](CsvWriter& w) {
        w.row({"paper_id", "cd", "c_prime", "d_prime", "cd_prime", "n_citers", "n_refs"});
        for (const auto& p : kept) {
            w.row({p.paper_id, format_double(p.cd), format_double(p.c_prime), format_double(p.d_prime),
                   format_double(p.cd_prime), std::to_string(p.n_citers), std::to_string(p.n_refs)});
        }
    });
    cx.csv(cx.out("disruption_refs.csv"), [&](CsvWriter& w) {
        w.row({"paper_id", "reference_id", "c", "d", "n_citers", "empty"});
        for (const auto& p : kept) {
            for (const auto& r : p.per_ref) {
                w.row({p.paper_id, r.reference_id, format_double(r.c), format_double(r.d), std::to_string(r.n_citers),
                       flag(r.empty)});
            }
        }
    });
    std::set<int> years;
    for (const auto& p : kept) years.insert(p.year);
    cx.csv(cx.out("disruption_ratio.csv"), [&](CsvWriter& w) {
        w.row({"year", "cutoff", "p_stylized", "p_popularized", "n_stylized", "n_popularized", "ratio", "undefined"});
        for (int y : years) {
            DisruptionRatio r;
            try {
                r = disruption_ratio(kept, labels, y);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::data && e.kind() != ErrorKind::invalid_argument) throw;
                continue;  // a label group is empty that year
            }
            w.row({std::to_string(y), format_double(r.cutoff), format_double(r.p_stylized),
                   format_double(r.p_popularized), std::to_string(r.n_stylized), std::to_string(r.n_popularized),
                   format_double(r.ratio), flag(r.undefined)});
        }
    });
    const auto pr = graph.size() ? pagerank(graph, cfg.damping) : std::vector<double>{};
    cx.csv(cx.out("pagerank.csv"), [&](CsvWriter& w) {
        w.row({"paper_id", "pagerank"});
        for (std::uint32_t n = 0; n < graph.size(); ++n) {
            w.row({graph.id(n), format_double(pr[n])});
        }
    });
}

void stage_recombine(StageContext& cx) {
    const auto& cfg = cx.st.cfg;
    const auto& corpus = cx.corpus();
    RecombinationParams params;
    params.cutoff_year = cfg.cutoff_year;
    params.threshold = cfg.threshold;
    params.walk = cfg.walk;
    params.walk.seed = cfg.walk_seed.value_or(cfg.seed);
    const auto result = run_recombination(corpus, params);
    const auto labels = cx.labels();
    std::unordered_map<std::string, int> years;
    for (const auto& p : corpus.papers()) years[p.paper_id] = p.year;

    std::size_t remote = 0;
    cx.csv(cx.out("combos.csv"), [&](CsvWriter& w) {
        w.row({"concept_a", "concept_b", "first_year", "originators", "distance", "remote", "reuse_count",
               "disconnected_flag"});
        for (const auto& e : result.events) {
            remote += e.remote ? 1 : 0;
            w.row({e.concept_a, e.concept_b, std::to_string(e.first_year), join(e.originator_ids, ";"),
                   format_double(e.distance), flag(e.remote), std::to_string(e.reuse_count), flag(e.disconnected)});
        }
    });
    cx.csv(cx.out("remote_stats.csv"), [&](CsvWriter& w) {
        w.row({"year", "excluding", "n_stylized", "n_popularized", "overall_distance", "overall_remote",
               "distance_ratio_stylized", "distance_ratio_popularized", "remote_ratio_stylized",
               "remote_ratio_popularized", "stylized_dropped", "popularized_dropped"});
        for (int y = result.cutoff_year; y <= corpus.max_year(); ++y) {
            for (bool excluding : {false, true}) {
                RemoteStats s;
                try {
                    s = group_remote_stats(result.events, labels, years, y, excluding);
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::data && e.kind() != ErrorKind::invalid_argument) throw;
                    continue;
                }
                w.row({std::to_string(y), flag(excluding), std::to_string(s.n_stylized),
                       std::to_string(s.n_popularized), format_double(s.overall_distance),
                       format_double(s.overall_remote), format_double(s.distance_ratio_stylized),
                       format_double(s.distance_ratio_popularized), format_double(s.remote_ratio_stylized),
                       format_double(s.remote_ratio_popularized), flag(s.stylized_dropped),
                       flag(s.popularized_dropped)});
            }
        }
    });
    cx.csv(cx.out("recombine_summary.csv"), [&](CsvWriter& w) {
        w.row({"metric", "value"});
        w.row({"cutoff_year", std::to_string(result.cutoff_year)});
        w.row({"baseline_pairs", std::to_string(result.baseline_size)});
        w.row({"events", std::to_string(result.events.size())});
        w.row({"remote_events", std::to_string(remote)});
        w.row({"exclude_without_combos", flag(cfg.exclude_without_combos)});
    });
}

void stage_reception(StageContext& cx) {
    const auto& cfg = cx.st.cfg;
    const auto& corpus = cx.corpus();
    const auto rows = compute_reception(corpus, cx.graph(), cfg.reception);
    const auto labels = cx.labels();

    cx.csv(cx.out("reception.csv"), [&](CsvWriter& w) {
        w.row({"paper_id", "year", "c5", "c10", "citation_count", "citation_normalized", "normalization_flag",
               "sb_strength", "turnaround_days", "excluded_reason", "date_error"});
        for (const auto& r : rows) {
            w.row({r.paper_id, std::to_string(r.year), std::to_string(r.c5), std::to_string(r.c10),
                   std::to_string(r.citation_count), format_double(r.citation_normalized), flag(r.normalization_flag),
                   format_double(r.sb_strength), r.turnaround_days ? std::to_string(*r.turnaround_days) : "NA",
                   r.excluded_reason ? std::string(to_string(*r.excluded_reason)) : "", flag(r.date_error)});
        }
    });

    const std::vector<std::string> metrics = {"c5", "c10", "citation_normalized", "sb_strength", "turnaround_days"};
    std::vector<RatioSeries> series;
    for (const auto& m : metrics) {
        std::vector<LabeledValue> vals;
        for (const auto& r : rows) {
            auto it = labels.find(r.paper_id);
            if (it == labels.end()) continue;
            std::optional<double> v;
            if (m == "c5") v = static_cast<double>(r.c5);
            else if (m == "c10") v = static_cast<double>(r.c10);
            else if (m == "citation_normalized") v = r.citation_normalized;
            else if (m == "sb_strength") v = r.sb_strength;
            else if (r.turnaround_days && !r.excluded_reason) v = static_cast<double>(*r.turnaround_days);
            if (v && std::isfinite(*v)) vals.push_back({r.year, it->second, *v});
        }
        series.push_back(ratio_series(m, vals));
    }
    cx.csv(cx.out("ratio_series.csv"), [&](CsvWriter& w) {
        w.row({"metric", "year", "n_stylized", "n_popularized", "stylized_mean", "popularized_mean", "ratio",
               "p_value", "exact", "stars"});
        for (const auto& s : series) {
            for (const auto& p : s.points) {
                w.row({s.metric, std::to_string(p.year), std::to_string(p.n_stylized),
                       std::to_string(p.n_popularized), format_double(p.stylized_mean),
                       format_double(p.popularized_mean), format_double(p.ratio), format_double(p.p_value),
                       flag(p.exact), p.stars});
            }
        }
    });

    // yearly mean stylization and its linear trend
    std::map<int, std::vector<double>> by_year;
    for (const auto& p : cx.primary()) by_year[p.year].push_back(p.score);
    std::vector<CurvePoint> pts;
    for (const auto& [y, v] : by_year) pts.push_back({static_cast<double>(y), mean(v)});
    std::optional<TrendFit> fit;
    if (pts.size() >= 3) fit = trend_fit(pts);
    cx.csv(cx.out("trend.csv"), [&](CsvWriter& w) {
        w.row({"year", "n", "mean", "fit", "lo", "hi"});
        std::size_t i = 0;
        for (const auto& [y, v] : by_year) {
            const bool has = fit && i < fit->band.size();
            w.row({std::to_string(y), std::to_string(v.size()), format_double(pts[i].y),
                   has ? format_double(fit->band[i].fit) : "NA", has ? format_double(fit->band[i].lo) : "NA",
                   has ? format_double(fit->band[i].hi) : "NA"});
            ++i;
        }
    });
    cx.csv(cx.out("trend_summary.csv"), [&](CsvWriter& w) {
        w.row({"variant", "beta", "se_beta", "intercept", "r2", "n"});
        if (fit) {
            w.row({std::string(to_string(cfg.variants.front())), format_double(fit->beta), format_double(fit->se_beta),
                   format_double(fit->intercept), format_double(fit->r2), std::to_string(fit->n)});
        }
    });
}

void stage_twins(StageContext& cx) {
    const auto& cfg = cx.st.cfg;
    const auto& corpus = cx.corpus();
    cx.input(*cfg.contexts);
    const auto contexts = load_contexts(*cfg.contexts);
    const auto pairs = cocitation_pairs(contexts, cfg.sentence_gap);
    auto twins = detect_twins(pairs, corpus, cfg.twins);

    std::vector<StylizationEntry> knn5;
    for (const auto& e : cx.entries()) {
        if (e.variant == Variant::knn5) knn5.push_back(e);
    }
    if (knn5.empty()) {
        StylizeOptions opt;
        opt.variants = {Variant::knn5};
        opt.rotation = cfg.rotation;
        knn5 = stylize_corpus(corpus, opt).entries;
    }
    std::unordered_map<std::string, double> score;
    for (const auto& p : paper_scores(knn5)) score[p.paper_id] = p.score;
    const PaperFilter eligible = [&](const PaperRecord& p) { return score.count(p.paper_id) > 0; };

    std::vector<TwinPair> scored;
    for (auto& t : twins) {
        auto ia = score.find(t.paper_a), ib = score.find(t.paper_b);
        if (ia != score.end()) t.score_a = ia->second;
        if (ib != score.end()) t.score_b = ib->second;
        if (t.score_a && t.score_b) {
            t.score_diff = std::abs(*t.score_a - *t.score_b);
            try {
                t.control_id = sample_controls(t, corpus, cfg.seed, eligible);
                t.control_diff = std::abs(*t.score_a - score.at(*t.control_id));
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::data && e.kind() != ErrorKind::invalid_argument) throw;
            }
            scored.push_back(t);
        }
    }
    cx.csv(cx.out("twins.csv"), [&](CsvWriter& w) {
        w.row({"paper_a", "paper_b", "cocite", "refsim", "b2b", "score_a", "score_b", "score_diff", "control_id",
               "control_diff"});
        for (const auto& t : twins) {
            w.row({t.paper_a, t.paper_b, std::to_string(t.co_citation_count), format_double(t.refsim), flag(t.b2b),
                   format_double(t.score_a), format_double(t.score_b), format_double(t.score_diff),
                   t.control_id.value_or("NA"), format_double(t.control_diff)});
        }
    });
    std::optional<ValidationReport> rep;
    if (!scored.empty()) rep = validate_scores(scored, knn5, cfg.tolerance);
    cx.csv(cx.out("twin_validation.csv"), [&](CsvWriter& w) {
        w.row({"metric", "value"});
        w.row({"pairs_detected", std::to_string(twins.size())});
        w.row({"pairs_scored", std::to_string(scored.size())});
        if (!rep) return;
        w.row({"pearson_r", format_double(rep->pearson_r)});
        w.row({"tolerance", format_double(rep->tolerance)});
        w.row({"twin_within", format_double(rep->twin_within)});
        w.row({"control_within", format_double(rep->control_within)});
        w.row({"rank_sum_p", format_double(rep->rank_sum_p)});
        w.row({"mutual_knn_fraction", format_double(rep->mutual_knn_fraction)});
        w.row({"no_common_cohort", std::to_string(rep->no_common_cohort)});
        for (std::size_t k = 0; k < rep->neighbor_overlap.size(); ++k) {
            w.row({"neighbor_overlap_" + std::to_string(k), std::to_string(rep->neighbor_overlap[k])});
        }
    });
    cx.csv(cx.out("twin_survival.csv"), [&](CsvWriter& w) {
        w.row({"group", "threshold", "fraction"});
        if (!rep) return;
        for (const auto& p : rep->twin_survival) w.row({"twin", format_fixed(p.threshold, 2), format_double(p.fraction)});
        for (const auto& p : rep->control_survival)
            w.row({"control", format_fixed(p.threshold, 2), format_double(p.fraction)});
    });
}

bool is_count_response(const std::string& r) { return r == "c5" || r == "c10" || r == "citation_count"; }

void stage_regress(StageContext& cx) {
    const auto& cfg = cx.st.cfg;
    const auto& corpus = cx.corpus();
    const auto& graph = cx.graph();
    const auto rows = build_covariates(corpus, cx.scores());
    cx.csv(cx.out("covariates.csv"), [&](CsvWriter& w) {
        std::vector<std::string> head = {"paper_id", "year", "field"};
        head.insert(head.end(), kCovariateNames.begin(), kCovariateNames.end());
        head.push_back("missing");
        w.row(head);
        for (const auto& r : rows) {
            std::vector<std::string> f = {r.paper_id, std::to_string(r.year), r.field};
            for (const auto& v : r.values) f.push_back(format_double(v));
            f.push_back(join(r.missing, ";"));
            w.row(f);
        }
    });

    std::vector<RegressionResult> results;
    for (const auto& response : cfg.responses) {
        std::unordered_map<std::string, double> y;
        if (response == "cd") {
            for (const auto& p : cx.profiles()) {
                if (p.cd) y[p.paper_id] = *p.cd;
            }
        } else if (response == "turnaround_days") {
            for (const auto& p : corpus.papers()) {
                try {
                    const auto t = turnaround(p.history, cfg.reception.turnaround);
                    if (t.days && !t.excluded) y[p.paper_id] = *t.days;
                } catch (const Error&) {
                    // accepted before submitted: no response
                }
            }
        } else {
            for (std::uint32_t n = 0; n < graph.size(); ++n) {
                const auto c = citation_windows(graph, n, cfg.reception.inclusive_windows);
                y[graph.id(n)] = static_cast<double>(response == "c5" ? c.c5 : response == "c10" ? c.c10 : c.total);
            }
        }
        const auto design = build_design(rows, y, response, cfg.fe);
        const bool poisson = cfg.model == "poisson" || (cfg.model == "auto" && is_count_response(response));
        results.push_back(poisson ? poisson_pml(design) : ols_fe(design));
    }
    const auto dir = cfg.tables_dir.value_or(cx.out("tables"));
    if (!results.empty()) {
        const auto table = model_table(results);
        cx.text(dir / "models.md", table.markdown);
        auto f = cx.open(dir / "models.csv");
        CsvWriter w(f);
        w.comment("seed=" + std::to_string(cfg.seed));
        f << table.csv;
    }
    cx.csv(dir / "coefficients.csv", [&](CsvWriter& w) {
        w.row({"response", "model", "term", "beta", "se", "p", "n_obs", "r2", "iterations", "dropped_rows",
               "dropped_groups", "separated"});
        for (const auto& r : results) {
            for (std::size_t i = 0; i < r.names.size(); ++i) {
                w.row({r.response, std::string(to_string(r.model)), r.names[i], format_double(r.beta(i)),
                       format_double(r.se(i)), format_double(r.p(i)), std::to_string(r.n_obs), format_double(r.r2),
                       std::to_string(r.iterations), std::to_string(r.dropped_rows), join(r.dropped_groups, ";"),
                       join(r.separated, ";")});
            }
        }
    });
}

std::string with_seed(const std::string& svg, std::uint64_t seed) {
    return "<!-- seed=" + std::to_string(seed) + " -->\n" + svg;
}

void stage_report(StageContext& cx) {
    const auto& cfg = cx.st.cfg;
    const auto dir = cfg.svg_dir.value_or(cx.out("svg"));
    auto use = [&](const std::string& name) -> std::optional<CsvTable> {
        const auto p = cx.out(name);
        if (!fs::exists(p)) return std::nullopt;
        cx.input(p);
        return read_csv(p);
    };
    std::vector<std::string> lines = {"# Report", ""};

    if (auto t = use("trend.csv"); t && !t->rows.empty()) {
        svg::Line means{"yearly mean", {}, true, {}, {}};
        svg::Line fit{"linear fit, 95% band", {}, false, {}, {}};
        std::vector<CurvePoint> pts;
        for (const auto& r : t->rows) {
            const double x = parse_int(r.at(t->col("year")));
            const auto m = parse_number(r.at(t->col("mean")));
            if (!m) continue;
            means.points.push_back({x, *m});
            pts.push_back({x, *m});
            if (auto f = parse_number(r.at(t->col("fit")))) {
                fit.points.push_back({x, *f});
                fit.lo.push_back(parse_number(r.at(t->col("lo"))).value_or(*f));
                fit.hi.push_back(parse_number(r.at(t->col("hi"))).value_or(*f));
            }
        }
        std::vector<svg::Line> chart = {means};
        if (!fit.points.empty()) chart.push_back(fit);
        if (pts.size() >= 3) {
            svg::Line smooth{"kernel smoothed", {}, false, {}, {}};
            for (const auto& p : kernel_smooth(pts)) smooth.points.push_back({p.x, p.y});
            chart.push_back(smooth);
        }
        cx.text(dir / "stylization_trend.svg",
                with_seed(svg::line_chart({"Stylization by year", "year", "mean score", {}}, chart), cfg.seed));
    }
    if (auto t = use("decade_histogram.csv"); t && !t->rows.empty()) {
        const std::string variant(to_string(cfg.variants.front()));
        std::map<int, std::vector<svg::Bar>> bars;
        for (const auto& r : t->rows) {
            if (r.at(t->col("variant")) != variant) continue;
            bars[parse_int(r.at(t->col("decade")))].push_back({*parse_number(r.at(t->col("bin_lo"))),
                                                                *parse_number(r.at(t->col("bin_hi"))),
                                                                *parse_number(r.at(t->col("count")))});
        }
        for (const auto& [decade, b] : bars) {
            const auto name = "decade_" + std::to_string(decade) + ".svg";
            cx.text(dir / name, with_seed(svg::bar_chart({"Stylization, " + std::to_string(decade) + "s", "score",
                                                          "papers", {}},
                                                         b),
                                          cfg.seed));
        }
    }
    if (auto t = use("ratio_series.csv"); t && !t->rows.empty()) {
        std::map<std::string, svg::Line> by_metric;
        for (const auto& r : t->rows) {
            const auto m = r.at(t->col("metric"));
            auto& line = by_metric[m];
            line.name = m;
            line.markers = true;
            const auto v = parse_number(r.at(t->col("ratio")));
            line.points.push_back({static_cast<double>(parse_int(r.at(t->col("year")))),
                                   v.value_or(std::numeric_limits<double>::quiet_NaN())});
        }
        std::vector<svg::Line> chart;
        for (auto& [m, l] : by_metric) chart.push_back(l);
        cx.text(dir / "ratios.svg",
                with_seed(svg::line_chart({"Stylized / popularized", "year", "ratio", 1.0}, chart), cfg.seed));
    }
    if (auto t = use("remote_stats.csv"); t && !t->rows.empty()) {
        svg::Line s{"stylized", {}, true, {}, {}}, p{"popularized", {}, true, {}, {}};
        for (const auto& r : t->rows) {
            if (r.at(t->col("excluding")) != "false") continue;
            const double x = parse_int(r.at(t->col("year")));
            s.points.push_back({x, parse_number(r.at(t->col("distance_ratio_stylized")))
                                       .value_or(std::numeric_limits<double>::quiet_NaN())});
            p.points.push_back({x, parse_number(r.at(t->col("distance_ratio_popularized")))
                                       .value_or(std::numeric_limits<double>::quiet_NaN())});
        }
        cx.text(dir / "knowledge_distance.svg",
                with_seed(svg::line_chart({"Knowledge distance ratio", "year", "ratio to yearly mean", 1.0}, {s, p}),
                          cfg.seed));
    }
    if (auto t = use("twin_survival.csv"); t && !t->rows.empty()) {
        svg::Line tw{"twins", {}, false, {}, {}}, ct{"controls", {}, false, {}, {}};
        for (const auto& r : t->rows) {
            auto& l = r.at(t->col("group")) == "twin" ? tw : ct;
            l.points.push_back({*parse_number(r.at(t->col("threshold"))), *parse_number(r.at(t->col("fraction")))});
        }
        cx.text(dir / "twin_survival.svg",
                with_seed(svg::line_chart({"Score difference survival", "|difference|", "share above", {}}, {tw, ct}),
                          cfg.seed));
    }
    for (const auto& name : {"trend_summary.csv", "twin_validation.csv", "recombine_summary.csv"}) {
        if (auto t = use(name); t && !t->rows.empty()) {
            lines.push_back("## " + std::string(name));
            lines.push_back("");
            lines.push_back("| " + join(t->header, " | ") + " |");
            std::string rule = "|";
            for (std::size_t i = 0; i < t->header.size(); ++i) rule += "---|";
            lines.push_back(rule);
            for (const auto& r : t->rows) lines.push_back("| " + join(r, " | ") + " |");
            lines.push_back("");
        }
    }
    std::string body = "<!-- seed=" + std::to_string(cfg.seed) + " -->\n";
    for (const auto& l : lines) body += l + "\n";
    cx.text(cx.out("report.md"), body);
}

using StageFn = void (*)(StageContext&);

StageFn stage_fn(const std::string& name) {
    static const std::map<std::string, StageFn> fns = {
        {"ingest", stage_ingest},       {"stylize", stage_stylize}, {"disrupt", stage_disrupt},
        {"recombine", stage_recombine}, {"reception", stage_reception}, {"twins", stage_twins},
        {"regress", stage_regress},     {"report", stage_report},
    };
    return fns.at(name);
}

std::string manifest_line(const StageRecord& r) {
    ojson j;
    j["stage"] = r.stage;
    j["status"] = r.ok ? "ok" : "failed";
    ojson in = ojson::object();
    for (const auto& [p, h] : r.inputs) in[p] = h;
    j["inputs"] = in;
    j["params"] = ojson::parse(r.params);
    j["outputs"] = r.outputs;
    j["duration_ms"] = std::round(r.duration_ms * 1000.0) / 1000.0;
    if (!r.ok) j["error"] = r.error;
    return j.dump();
}

}  // namespace

// ---------------------------------------------------------------------------

PipelineConfig load_pipeline_config(const fs::path& path) {
    PipelineConfig c;
    load_toml(path, c, pipeline_keys());
    return c;
}

SynthConfig load_synth_config(const fs::path& path) {
    SynthConfig c;
    load_toml(path, c, synth_keys());
    return c;
}

void validate(const PipelineConfig& c) {
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::config, msg); };
    std::set<std::string> stages;
    for (const auto& s : c.stages) {
        if (std::find(kStages.begin(), kStages.end(), s) == kStages.end()) fail("unknown stage '" + s + "'");
        stages.insert(s);
    }
    if (stages.empty()) fail("no stages selected");
    auto needs = [&](std::initializer_list<const char*> names) {
        for (auto n : names)
            if (stages.count(n)) return true;
        return false;
    };
    if (needs({"ingest", "stylize", "disrupt", "recombine", "reception", "twins", "regress"}) && c.corpus.empty()) {
        fail("input.corpus: no corpus files given");
    }
    for (const auto& p : c.corpus) {
        if (!fs::exists(p)) fail("corpus file not found: " + p.string());
    }
    if (c.embeddings && !fs::exists(*c.embeddings)) fail("embedding file not found: " + c.embeddings->string());
    if (c.contexts && !fs::exists(*c.contexts)) fail("context file not found: " + c.contexts->string());
    if (stages.count("stylize") && !c.embeddings) fail("input.embeddings: the stylize stage needs embeddings");
    if (stages.count("twins") && !c.contexts) fail("input.contexts: the twins stage needs citation contexts");
    if (c.variants.empty()) fail("stylize.variants: at least one variant");
    if (c.rotation.removal_rank < 0) fail("stylize.removal_rank must be >= 0");
    if (c.min_citations < 0) fail("disrupt.min_citations must be >= 0");
    if (!(c.damping > 0.0 && c.damping < 1.0)) fail("disrupt.damping must lie in (0, 1)");
    if (!(c.threshold >= 0.0 && c.threshold <= 1.0)) fail("recombine.threshold must lie in [0, 1]");
    if (c.walk.dim < 1 || c.walk.walks_per_node < 1 || c.walk.walk_length < 2 || c.walk.context < 1 ||
        c.walk.window_years < 1)
        fail("recombine: walk parameters must be positive");
    if (c.reception.turnaround.min_days < 0 || c.reception.turnaround.max_days < c.reception.turnaround.min_days)
        fail("reception: need 0 <= min_days <= max_days");
    if (c.twins.min_cocite < 1) fail("twins.min_cocite must be >= 1");
    if (!(c.twins.refsim_threshold >= 0.0 && c.twins.refsim_threshold <= 1.0))
        fail("twins.refsim_threshold must lie in [0, 1]");
    if (c.sentence_gap < 0) fail("twins.sentence_gap must be >= 0");
    if (c.tolerance < 0.0) fail("twins.tolerance must be >= 0");
    for (const auto& r : c.responses) {
        if (r != "c5" && r != "c10" && r != "citation_count" && r != "cd" && r != "turnaround_days")
            fail("regress.responses: unknown response '" + r + "'");
    }
    if (c.model != "auto" && c.model != "poisson" && c.model != "ols") fail("regress.model: auto, poisson or ols");
    for (const auto& f : c.fe) {
        if (f != "year" && f != "field") fail("regress.fe: unknown fixed effect '" + f + "'");
    }
}

PipelineResult run_pipeline(const PipelineConfig& config) {
    PipelineResult result;
    try {
        validate(config);
    } catch (const Error& e) {
        result.exit_code = 2;
        result.error = e.what();
        return result;
    }
    set_thread_count(config.threads);
    std::error_code ec;
    fs::create_directories(config.out_dir, ec);
    if (ec) {
        result.exit_code = 2;
        result.error = "cannot create output directory " + config.out_dir.string() + ": " + ec.message();
        return result;
    }
    std::ofstream manifest(config.out_dir / "manifest.ndjson", std::ios::binary);
    if (!manifest) {
        result.exit_code = 2;
        result.error = "cannot write " + (config.out_dir / "manifest.ndjson").string();
        return result;
    }
    State state(config);
    for (const auto& stage : kStages) {
        if (std::find(config.stages.begin(), config.stages.end(), stage) == config.stages.end()) {
            continue;
        }
        StageRecord rec;
        rec.stage = stage;
        rec.params = stage_params(config, stage).dump();
        const auto start = std::chrono::steady_clock::now();
        StageContext cx(state, rec);
        try {
            stage_fn(stage)(cx);
        } catch (const std::exception& e) {
            rec.ok = false;
            rec.error = e.what();
        }
        rec.duration_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        manifest << manifest_line(rec) << '\n';
        manifest.flush();
        result.manifest.push_back(rec);
        if (!rec.ok) {
            result.exit_code = 1;
            result.error = stage + ": " + rec.error;
            break;
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

int run_cli(int argc, char** argv) {
    CLI::App app{"Stylization, disruption and reception metrics for publication corpora", "sciline"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "TOML config file");
    std::deque<Binding<PipelineConfig>> pipeline_flags;
    bind_keys(app, pipeline_keys(), pipeline_flags);

    std::map<std::string, CLI::App*> subs;
    std::map<std::string, std::string> sub_out;
    const std::map<std::string, std::string> help = {
        {"ingest", "load, validate and deduplicate the corpus"},
        {"stylize", "cohort stylization scores"},
        {"disrupt", "CD index, its decomposition and PageRank"},
        {"recombine", "new concept combinations and their distances"},
        {"reception", "citation windows, ratios and review turnaround"},
        {"twins", "twin papers and score validation"},
        {"regress", "fixed-effects OLS and Poisson models"},
        {"report", "SVG plots and a summary from existing outputs"},
        {"run", "every configured stage in order"},
        {"synth", "generate a synthetic corpus"},
    };
    for (const auto& [name, text] : help) {
        auto* sub = app.add_subcommand(name, text);
        sub->fallthrough();
        sub->add_option("--out", sub_out[name],
                        name == "stylize"   ? "score CSV path"
                        : name == "regress" ? "table directory"
                                            : "output directory");
        subs[name] = sub;
    }
    std::deque<Binding<SynthConfig>> synth_flags;
    bind_keys(*subs["synth"], synth_keys(), synth_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    std::string command;
    for (const auto& [name, sub] : subs) {
        if (sub->parsed()) command = name;
    }

    try {
        if (command == "synth") {
            SynthConfig sc = config_path.empty() ? SynthConfig{} : load_synth_config(config_path);
            apply_bindings(synth_flags, sc);
            PipelineConfig scratch;
            apply_bindings(pipeline_flags, scratch);
            for (const auto& b : pipeline_flags) {
                if (b.key->name == "run.seed" && b.option->count()) sc.seed = scratch.seed;
                if (b.key->name == "run.threads" && b.option->count()) set_thread_count(scratch.threads);
            }
            const auto& out = sub_out["synth"];
            if (out.empty()) {
                throw Error(ErrorKind::config, "synth: --out is required");
            }
            validate(sc);
            generate_corpus(sc, out);
            std::cerr << "synth: wrote " << out << '\n';
            return 0;
        }

        PipelineConfig cfg = config_path.empty() ? PipelineConfig{} : load_pipeline_config(config_path);
        apply_bindings(pipeline_flags, cfg);
        if (const auto& out = sub_out[command]; !out.empty()) {
            if (command == "stylize") cfg.scores_out = out;
            else if (command == "regress") cfg.tables_dir = out;
            else cfg.out_dir = out;
        }
        if (command != "run") {
            cfg.stages = {command};
        }
        const auto result = run_pipeline(cfg);
        if (result.exit_code != 0) {
            std::cerr << "error: " << result.error << '\n';
        } else {
            for (const auto& r : result.manifest) {
                std::cerr << r.stage << ": " << r.outputs.size() << " outputs\n";
            }
        }
        return result.exit_code;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.kind() == ErrorKind::config ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace sciline

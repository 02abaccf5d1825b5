#include "promptopt/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <sstream>

#include "promptopt/jsonio.hpp"

namespace promptopt {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestTag = "#corpus";
constexpr const char* kVersion = "v=1";

ojson record_to_json(const CorpusRecord& record) {
    ojson j = to_json(record.instance);
    j["assets"] = record.assets ? to_json(*record.assets) : ojson(nullptr);
    j["asset_model_id"] =
        record.asset_model_id ? ojson(*record.asset_model_id) : ojson(nullptr);
    return j;
}

CorpusRecord record_from_json(const ojson& j, std::int64_t created_at) {
    CorpusRecord record;
    record.instance = instance_from_json(j);
    if (j.contains("assets") && !j["assets"].is_null()) {
        record.assets = assets_from_json(j["assets"]);
    }
    if (j.contains("asset_model_id") && !j["asset_model_id"].is_null()) {
        record.asset_model_id = j["asset_model_id"].get<std::string>();
    }
    record.created_at = created_at;
    return record;
}

void validate_record(const CorpusRecord& record) {
    validate_prompt(record.instance.prompt);
    validate_scores(record.instance.scores);
    if (is_blank(record.instance.response)) throw EmptyText("response");
    if (record.assets) {
        validate_assets(*record.assets);
        if (record.assets->source_id != record.id()) {
            throw InvalidRecord("assets source_id " + record.assets->source_id +
                                " does not match record id " + record.id());
        }
    }
}

struct NumberedLine {
    std::string json_part;
    std::string stamp_part;
};

}  // namespace

// ---------------------------------------------------------------------------
// ScopedFileLock

ScopedFileLock::ScopedFileLock(const fs::path& target) {
    lock_path_ = target;
    lock_path_ += ".lock";
    int fd = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) throw CorpusLocked(lock_path_.string());
    ::close(fd);
    held_ = true;
}

ScopedFileLock::~ScopedFileLock() {
    if (held_) {
        std::error_code ec;
        fs::remove(lock_path_, ec);
    }
}

ScopedFileLock::ScopedFileLock(ScopedFileLock&& other) noexcept
    : lock_path_(std::move(other.lock_path_)), held_(other.held_) {
    other.held_ = false;
}

ScopedFileLock& ScopedFileLock::operator=(ScopedFileLock&& other) noexcept {
    if (this != &other) {
        if (held_) {
            std::error_code ec;
            fs::remove(lock_path_, ec);
        }
        lock_path_ = std::move(other.lock_path_);
        held_ = other.held_;
        other.held_ = false;
    }
    return *this;
}

// ---------------------------------------------------------------------------
// Persistence

std::string CorpusStore::serialize() const {
    std::uint64_t content_state = kFnvOffset;
    std::uint64_t stamp_state = kFnvOffset;
    std::ostringstream out;
    for (const auto& record : records_) {
        std::string json_part = canonical_line(record_to_json(record));
        std::string stamp = iso8601_utc(record.created_at);
        content_state = fnv1a64(json_part, content_state);
        content_state = fnv1a64("\n", content_state);
        stamp_state = fnv1a64(stamp, stamp_state);
        stamp_state = fnv1a64("\n", stamp_state);
        out << json_part << "\t" << stamp << "\n";
    }
    std::ostringstream prefix;
    prefix << kManifestTag << " " << kVersion << " n=" << records_.size()
           << " stamps=" << to_hex16(stamp_state) << " ";
    content_state = fnv1a64(prefix.str(), content_state);
    out << prefix.str() << "checksum=" << to_hex16(content_state) << "\n";
    return out.str();
}

void CorpusStore::persist() const {
    if (!path_.empty()) write_file_atomic(path_, serialize());
}

void CorpusStore::save(const fs::path& path) {
    if (path_ != path) {
        lock_ = ScopedFileLock(path);
        path_ = path;
    }
    persist();
}

void CorpusStore::save() const {
    if (path_.empty()) throw IoError("corpus store has no bound path");
    persist();
}

CorpusStore CorpusStore::load(const fs::path& path) {
    std::string content = read_file(path);
    auto lines = split_lines(content);
    if (lines.empty() || !starts_with(lines.back(), std::string(kManifestTag) + " ")) {
        throw ChecksumMismatch("manifest line missing or unreadable");
    }

    // Manifest: "#corpus v=<V> n=<N> stamps=<hex> checksum=<hex>"
    std::istringstream manifest(lines.back());
    std::string tag, version, n_field, stamps_field, checksum_field;
    manifest >> tag >> version >> n_field >> stamps_field >> checksum_field;
    if (!starts_with(n_field, "n=") || !starts_with(stamps_field, "stamps=") ||
        !starts_with(checksum_field, "checksum=")) {
        throw ChecksumMismatch("manifest line malformed");
    }

    std::vector<NumberedLine> parsed;
    parsed.reserve(lines.size() - 1);
    std::uint64_t content_state = kFnvOffset;
    std::uint64_t stamp_state = kFnvOffset;
    for (std::size_t i = 0; i + 1 < lines.size(); ++i) {
        const std::string& line = lines[i];
        auto tab = line.rfind('\t');
        NumberedLine nl;
        if (tab == std::string::npos) {
            nl.json_part = line;
        } else {
            nl.json_part = line.substr(0, tab);
            nl.stamp_part = line.substr(tab + 1);
        }
        content_state = fnv1a64(nl.json_part, content_state);
        content_state = fnv1a64("\n", content_state);
        stamp_state = fnv1a64(nl.stamp_part, stamp_state);
        stamp_state = fnv1a64("\n", stamp_state);
        parsed.push_back(std::move(nl));
    }

    std::string manifest_prefix = lines.back().substr(0, lines.back().find("checksum="));
    content_state = fnv1a64(manifest_prefix, content_state);

    // Integrity first, then schema version: a corrupted byte anywhere in the
    // record region, timestamps or manifest reports as ChecksumMismatch.
    if (to_hex16(content_state) != checksum_field.substr(9)) {
        throw ChecksumMismatch("corpus content checksum");
    }
    if (version != kVersion) throw SchemaVersionUnsupported(version);
    if (to_hex16(stamp_state) != stamps_field.substr(7)) {
        throw ChecksumMismatch("timestamp checksum");
    }
    if (std::to_string(parsed.size()) != n_field.substr(2)) {
        throw ChecksumMismatch("record count disagrees with manifest");
    }

    CorpusStore store;
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        ojson j;
        std::int64_t created_at = 0;
        try {
            j = ojson::parse(parsed[i].json_part);
            created_at = parse_iso8601_utc(parsed[i].stamp_part);
        } catch (const std::exception& e) {
            throw FormatError(i + 1, e.what());
        }
        CorpusRecord record = record_from_json(j, created_at);
        validate_record(record);
        if (!store.by_id_.emplace(record.id(), store.records_.size()).second) {
            throw DuplicateDocId(record.id());
        }
        store.records_.push_back(std::move(record));
    }
    return store;
}

CorpusStore CorpusStore::open(const fs::path& path) {
    CorpusStore store = fs::exists(path) ? load(path) : CorpusStore();
    store.lock_ = ScopedFileLock(path);
    store.path_ = path;
    return store;
}

// ---------------------------------------------------------------------------
// Mutation

void CorpusStore::add(TrainingInstance instance) {
    validate_prompt(instance.prompt);
    validate_scores(instance.scores);
    if (is_blank(instance.response)) throw EmptyText("response");
    if (by_id_.count(instance.prompt.id)) throw DuplicateDocId(instance.prompt.id);

    CorpusRecord record;
    record.instance = std::move(instance);
    record.created_at = now_unix_seconds();
    by_id_.emplace(record.id(), records_.size());
    records_.push_back(std::move(record));
    persist();
}

void CorpusStore::append_assets(const std::string& id, ReasoningAssets assets, bool overwrite,
                                std::optional<std::string> asset_model_id) {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) throw UnknownId(id);
    CorpusRecord& record = records_[it->second];
    if (record.assets && !overwrite) throw AssetsAlreadyPresent(id);

    if (assets.source_id.empty()) assets.source_id = id;
    validate_assets(assets);
    if (assets.source_id != id) {
        throw InvalidRecord("assets source_id " + assets.source_id + " does not match " + id);
    }
    record.assets = std::move(assets);
    record.asset_model_id = std::move(asset_model_id);
    persist();
}

const CorpusRecord* CorpusStore::find(const std::string& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &records_[it->second];
}

double CorpusStore::asset_coverage() const {
    if (records_.empty()) return 0.0;
    std::size_t with_assets = 0;
    for (const auto& r : records_) {
        if (r.assets) ++with_assets;
    }
    return static_cast<double>(with_assets) / static_cast<double>(records_.size());
}

std::string CorpusStore::content_checksum() const {
    std::uint64_t state = kFnvOffset;
    for (const auto& record : records_) {
        state = fnv1a64(canonical_line(record_to_json(record)), state);
        state = fnv1a64("\n", state);
    }
    return to_hex16(state);
}

// ---------------------------------------------------------------------------
// Ingestion

namespace {

DatasetFormat format_or_throw(const std::string& name) {
    if (name == "helpsteer-jsonl") return DatasetFormat::HelpSteerJsonl;
    if (name == "helpsteer-csv") return DatasetFormat::HelpSteerCsv;
    throw InvalidRecord("unknown dataset format: " + name);
}

const std::array<const char*, 7> kKnownFields = {
    "id", "prompt", "response", "turns", "helpfulness", "correctness", "coherence"};

bool is_known_field(const std::string& name) {
    for (const char* f : kKnownFields) {
        if (name == f) return true;
    }
    return name == "complexity" || name == "verbosity";
}

RawInstance raw_from_json(const ojson& j) {
    RawInstance raw;
    if (j.contains("id")) {
        raw.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
    }
    if (j.contains("prompt") && j["prompt"].is_string()) {
        raw.prompt_text = j["prompt"].get<std::string>();
    }
    if (j.contains("turns") && j["turns"].is_array() && !j["turns"].empty()) {
        std::vector<Turn> turns;
        for (const auto& t : j["turns"]) {
            turns.push_back(Turn{t.value("role", "user"), t.value("text", "")});
        }
        raw.turns = std::move(turns);
    }
    if (j.contains("response") && j["response"].is_string()) {
        raw.response = j["response"].get<std::string>();
    }
    for (size_t i = 0; i < kMetricCount; ++i) {
        if (j.contains(kMetricNames[i]) && j[kMetricNames[i]].is_number()) {
            raw.scores[i] = j[kMetricNames[i]].get<double>();
        }
    }
    return raw;
}

// RFC-4180 style: quoted fields, "" escapes, embedded newlines.
std::vector<std::vector<std::string>> parse_csv(const std::string& content) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;

    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        if (row.size() > 1 || !row.front().empty()) rows.push_back(row);
        row.clear();
    };

    for (std::size_t i = 0; i < content.size(); ++i) {
        char c = content[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < content.size() && content[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"' && !field_started) {
            in_quotes = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\n') {
            if (!field.empty() && field.back() == '\r') field.pop_back();
            end_row();
        } else {
            field.push_back(c);
            field_started = true;
        }
    }
    if (!field.empty() || !row.empty()) end_row();
    return rows;
}

}  // namespace

DatasetFormat dataset_format_from_string(const std::string& name) {
    return format_or_throw(name);
}

IngestReport CorpusStore::ingest(const fs::path& dataset, DatasetFormat format) {
    std::string content = read_file(dataset);
    IngestReport report;
    std::vector<std::string> noticed_fields;

    auto note_extra = [&](const std::string& field) {
        for (const auto& f : noticed_fields) {
            if (f == field) return;
        }
        noticed_fields.push_back(field);
        report.notices.push_back("ignoring extra field '" + field + "'");
    };

    auto accept = [&](const RawInstance& raw, std::size_t row, std::size_t ordinal) {
        try {
            TrainingInstance instance =
                validate_training_instance(raw, std::to_string(ordinal));
            add(std::move(instance));
            ++report.accepted;
        } catch (const Error& e) {
            report.rejects.push_back(IngestReject{row, e.what()});
        }
    };

    if (format == DatasetFormat::HelpSteerJsonl) {
        auto lines = split_lines(content);
        std::size_t ordinal = 0;
        for (std::size_t i = 0; i < lines.size(); ++i) {
            if (is_blank(lines[i])) continue;
            std::size_t this_ordinal = ordinal++;
            ojson j;
            try {
                j = ojson::parse(lines[i]);
            } catch (const std::exception& e) {
                report.rejects.push_back(IngestReject{i + 1, std::string("FormatError: ") + e.what()});
                continue;
            }
            if (!j.is_object()) {
                report.rejects.push_back(IngestReject{i + 1, "FormatError: row is not an object"});
                continue;
            }
            for (const auto& item : j.items()) {
                if (!is_known_field(item.key())) note_extra(item.key());
            }
            accept(raw_from_json(j), i + 1, this_ordinal);
        }
    } else {
        auto rows = parse_csv(content);
        if (rows.empty()) {
            report.notices.push_back("dataset file is empty");
            return report;
        }
        const auto& header = rows.front();
        std::unordered_map<std::string, std::size_t> columns;
        for (std::size_t c = 0; c < header.size(); ++c) {
            std::string name = trim_copy(header[c]);
            columns[name] = c;
            if (!is_known_field(name)) note_extra(name);
        }
        auto cell = [&](const std::vector<std::string>& row,
                        const std::string& name) -> std::optional<std::string> {
            auto it = columns.find(name);
            if (it == columns.end() || it->second >= row.size()) return std::nullopt;
            return row[it->second];
        };
        for (std::size_t r = 1; r < rows.size(); ++r) {
            RawInstance raw;
            raw.id = cell(rows[r], "id");
            if (raw.id && raw.id->empty()) raw.id.reset();
            raw.prompt_text = cell(rows[r], "prompt");
            raw.response = cell(rows[r], "response");
            for (size_t i = 0; i < kMetricCount; ++i) {
                if (auto text = cell(rows[r], kMetricNames[i])) {
                    try {
                        raw.scores[i] = std::stod(*text);
                    } catch (const std::exception&) {
                        // left unset; validation reports the missing metric
                    }
                }
            }
            accept(raw, r, r - 1);
        }
    }

    if (report.accepted == 0 && report.rejects.empty()) {
        report.notices.push_back("dataset file is empty");
    }
    return report;
}

}  // namespace promptopt

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "promptopt/core.hpp"

namespace promptopt {

struct FormatError : Error {
    FormatError(std::size_t row, const std::string& cause)
        : Error("FormatError", "row " + std::to_string(row) + ": " + cause), row(row) {}
    std::size_t row;
};

struct ChecksumMismatch : Error {
    explicit ChecksumMismatch(const std::string& detail) : Error("ChecksumMismatch", detail) {}
};

struct SchemaVersionUnsupported : Error {
    explicit SchemaVersionUnsupported(const std::string& version)
        : Error("SchemaVersionUnsupported", version) {}
};

struct UnknownId : Error {
    explicit UnknownId(const std::string& id) : Error("UnknownId", id) {}
};

struct AssetsAlreadyPresent : Error {
    explicit AssetsAlreadyPresent(const std::string& id) : Error("AssetsAlreadyPresent", id) {}
};

struct CorpusLocked : Error {
    explicit CorpusLocked(const std::string& path) : Error("CorpusLocked", path) {}
};

struct CorpusRecord {
    TrainingInstance instance;
    std::optional<ReasoningAssets> assets;  // absent until the training phase runs
    std::int64_t created_at = 0;            // UTC seconds; excluded from checksums
    std::optional<std::string> asset_model_id;

    const std::string& id() const { return instance.prompt.id; }
};

enum class DatasetFormat { HelpSteerJsonl, HelpSteerCsv };
DatasetFormat dataset_format_from_string(const std::string& name);

struct IngestReject {
    std::size_t row = 0;  // 1-based data row / line number
    std::string reason;
};

struct IngestReport {
    std::size_t accepted = 0;
    std::vector<IngestReject> rejects;
    std::vector<std::string> notices;  // e.g. ignored extra columns
    double reject_fraction() const {
        std::size_t total = accepted + rejects.size();
        return total == 0 ? 0.0 : static_cast<double>(rejects.size()) / total;
    }
};

/// Holds the file lock for a corpus path while a writer exists; a second
/// writer on the same path fails with CorpusLocked.
class ScopedFileLock {
public:
    ScopedFileLock() = default;
    explicit ScopedFileLock(const std::filesystem::path& target);
    ~ScopedFileLock();
    ScopedFileLock(ScopedFileLock&& other) noexcept;
    ScopedFileLock& operator=(ScopedFileLock&& other) noexcept;
    ScopedFileLock(const ScopedFileLock&) = delete;
    ScopedFileLock& operator=(const ScopedFileLock&) = delete;

private:
    std::filesystem::path lock_path_;
    bool held_ = false;
};

/// In-memory corpus with line-delimited persistence. When bound to a path
/// (created via `open` or after `save`), every mutation is written through
/// atomically, so a reload always reflects the last append.
class CorpusStore {
public:
    CorpusStore() = default;

    /// Loads an existing corpus file, verifying checksums and version.
    static CorpusStore load(const std::filesystem::path& path);

    /// Opens for writing: loads if the file exists, otherwise starts empty;
    /// in both cases takes the writer lock.
    static CorpusStore open(const std::filesystem::path& path);

    IngestReport ingest(const std::filesystem::path& dataset, DatasetFormat format);

    void add(TrainingInstance instance);  // DuplicateDocId on id collision

    void append_assets(const std::string& id, ReasoningAssets assets, bool overwrite = false,
                       std::optional<std::string> asset_model_id = std::nullopt);

    void save(const std::filesystem::path& path);
    void save() const;  // to the bound path

    const std::vector<CorpusRecord>& records() const { return records_; }
    const CorpusRecord* find(const std::string& id) const;
    std::size_t size() const { return records_.size(); }

    /// Fraction of records carrying assets.
    double asset_coverage() const;

    /// Content identity: canonical record bytes with timestamps excluded, so
    /// re-ingesting identical data yields the same value.
    std::string content_checksum() const;

    const std::filesystem::path& path() const { return path_; }

private:
    std::vector<CorpusRecord> records_;
    std::unordered_map<std::string, std::size_t> by_id_;
    std::filesystem::path path_;
    ScopedFileLock lock_;

    std::string serialize() const;
    void persist() const;
};

}  // namespace promptopt

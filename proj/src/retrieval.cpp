#include "promptopt/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <unordered_set>

namespace promptopt {

namespace {

// Decodes one UTF-8 codepoint at `i`; advances `i`. Invalid bytes decode as
// U+FFFD one byte at a time.
char32_t next_codepoint(std::string_view s, size_t& i) {
    unsigned char c = s[i];
    if (c < 0x80) {
        ++i;
        return c;
    }
    int len = (c >= 0xF0) ? 4 : (c >= 0xE0) ? 3 : (c >= 0xC0) ? 2 : 0;
    if (len == 0 || i + len > s.size()) {
        ++i;
        return 0xFFFD;
    }
    char32_t cp = c & (0x7F >> len);
    for (int k = 1; k < len; ++k) {
        unsigned char cont = s[i + k];
        if ((cont & 0xC0) != 0x80) {
            ++i;
            return 0xFFFD;
        }
        cp = (cp << 6) | (cont & 0x3F);
    }
    i += len;
    return cp;
}

// Unicode blocks treated as separators beyond ASCII: common punctuation,
// symbol and space ranges. Letters and digits of any script are kept.
bool is_separator_codepoint(char32_t cp) {
    if (cp < 0x80) {
        return !((cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') ||
                 (cp >= 'A' && cp <= 'Z'));
    }
    if (cp >= 0x00A0 && cp <= 0x00BF) return true;   // latin-1 punctuation
    if (cp == 0x00D7 || cp == 0x00F7) return true;   // multiplication / division signs
    if (cp >= 0x2000 && cp <= 0x206F) return true;   // general punctuation (dashes, quotes)
    if (cp >= 0x2070 && cp <= 0x209F) return true;   // super/subscripts
    if (cp >= 0x20A0 && cp <= 0x20CF) return true;   // currency symbols
    if (cp >= 0x2100 && cp <= 0x2BFF) return true;   // letterlike, arrows, math, misc symbols
    if (cp >= 0x3000 && cp <= 0x303F) return true;   // CJK punctuation
    if (cp >= 0xFE30 && cp <= 0xFE4F) return true;   // compatibility forms
    if (cp >= 0xFF01 && cp <= 0xFF0F) return true;   // fullwidth punctuation
    if (cp >= 0xFF1A && cp <= 0xFF20) return true;
    if (cp >= 0xFF3B && cp <= 0xFF40) return true;
    if (cp >= 0xFF5B && cp <= 0xFF65) return true;
    if (cp == 0xFFFD) return true;
    return false;
}

void append_codepoint_lower(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        char c = static_cast<char>(cp);
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        out.push_back(c);
        return;
    }
    // Latin-1 uppercase folds to lowercase; other scripts pass through.
    if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) cp += 0x20;
    if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

std::vector<std::string> unique_in_order(const std::vector<std::string>& terms) {
    std::vector<std::string> unique;
    std::unordered_set<std::string_view> seen;
    for (const auto& t : terms) {
        if (seen.insert(t).second) unique.push_back(t);
    }
    return unique;
}

// Doc ids are caller-supplied and may contain whitespace; percent-escape the
// characters that would break the line format.
std::string escape_id(const std::string& id) {
    std::string out;
    for (unsigned char c : id) {
        if (c == '%' || c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            char buf[4];
            std::snprintf(buf, sizeof(buf), "%%%02X", c);
            out += buf;
        } else {
            out.push_back(static_cast<char>(c));
        }
    }
    return out;
}

std::string unescape_id(const std::string& id) {
    std::string out;
    for (size_t i = 0; i < id.size(); ++i) {
        if (id[i] == '%' && i + 2 < id.size()) {
            out.push_back(static_cast<char>(std::stoi(id.substr(i + 1, 2), nullptr, 16)));
            i += 2;
        } else {
            out.push_back(id[i]);
        }
    }
    return out;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    size_t i = 0;
    while (i < text.size()) {
        char32_t cp = next_codepoint(text, i);
        if (is_separator_codepoint(cp)) {
            if (!current.empty()) tokens.push_back(std::move(current)), current.clear();
        } else {
            append_codepoint_lower(current, cp);
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

Index Index::build(const std::vector<std::pair<std::string, std::string>>& docs) {
    Index index;
    std::unordered_set<std::string_view> ids;
    std::uint64_t total_length = 0;

    for (const auto& [id, text] : docs) {
        if (!ids.insert(id).second) throw DuplicateDocId(id);
        auto ordinal = static_cast<std::uint32_t>(index.doc_ids_.size());
        index.doc_ids_.push_back(id);

        auto terms = tokenize(text);
        index.doc_lengths_.push_back(static_cast<std::uint32_t>(terms.size()));
        total_length += terms.size();

        std::map<std::string, std::uint32_t> counts;
        for (auto& t : terms) ++counts[std::move(t)];
        for (auto& [term, tf] : counts) {
            index.postings_[term].push_back(Posting{ordinal, tf});
        }
    }
    index.avg_doc_length_ =
        docs.empty() ? 0.0 : static_cast<double>(total_length) / static_cast<double>(docs.size());
    return index;
}

double Index::idf(std::size_t df) const {
    double n = static_cast<double>(doc_count());
    double d = static_cast<double>(df);
    return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

double Index::bm25_score(const std::vector<std::string>& query_terms,
                         std::size_t ordinal) const {
    if (ordinal >= doc_count()) throw OrdinalOutOfRange(ordinal, doc_count());

    double score = 0;
    double len = static_cast<double>(doc_lengths_[ordinal]);
    double norm = kK1 * (1.0 - kB + kB * (avg_doc_length_ > 0 ? len / avg_doc_length_ : 0.0));

    for (const auto& term : unique_in_order(query_terms)) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        const auto& list = it->second;
        auto pos = std::lower_bound(list.begin(), list.end(), ordinal,
                                    [](const Posting& p, std::size_t o) { return p.doc < o; });
        if (pos == list.end() || pos->doc != ordinal) continue;
        double tf = static_cast<double>(pos->tf);
        score += idf(list.size()) * tf * (kK1 + 1.0) / (tf + norm);
    }
    return score;
}

std::vector<ScoredDoc> Index::top_k(const std::string& query_text, std::size_t k) const {
    std::vector<double> scores(doc_count(), 0.0);

    for (const auto& term : unique_in_order(tokenize(query_text))) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        double term_idf = idf(it->second.size());
        for (const Posting& p : it->second) {
            double tf = static_cast<double>(p.tf);
            double len = static_cast<double>(doc_lengths_[p.doc]);
            double norm =
                kK1 * (1.0 - kB + kB * (avg_doc_length_ > 0 ? len / avg_doc_length_ : 0.0));
            scores[p.doc] += term_idf * tf * (kK1 + 1.0) / (tf + norm);
        }
    }

    std::vector<std::size_t> candidates;
    for (std::size_t d = 0; d < scores.size(); ++d) {
        if (scores[d] > 0.0) candidates.push_back(d);
    }
    std::sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    if (candidates.size() > k) candidates.resize(k);

    std::vector<ScoredDoc> out;
    out.reserve(candidates.size());
    for (std::size_t d : candidates) out.push_back(ScoredDoc{doc_ids_[d], d, scores[d]});
    return out;
}

std::size_t Index::doc_length(std::size_t ordinal) const {
    if (ordinal >= doc_count()) throw OrdinalOutOfRange(ordinal, doc_count());
    return doc_lengths_[ordinal];
}

const std::string& Index::doc_id(std::size_t ordinal) const {
    if (ordinal >= doc_count()) throw OrdinalOutOfRange(ordinal, doc_count());
    return doc_ids_[ordinal];
}

// File layout (text, '\n' separators, versioned, checksummed):
//   index v=1 docs=<N> terms=<T>
//   doc <id> <length>           x N, ordinal order
//   term <term> <doc>:<tf> ...  x T, lexicographic order
//   checksum=<hex>              over every preceding byte
void Index::save(const std::filesystem::path& path) const {
    std::ostringstream out;
    std::vector<std::string> terms;
    terms.reserve(postings_.size());
    for (const auto& [term, list] : postings_) terms.push_back(term);
    std::sort(terms.begin(), terms.end());

    out << "index v=1 docs=" << doc_ids_.size() << " terms=" << terms.size() << "\n";
    for (std::size_t d = 0; d < doc_ids_.size(); ++d) {
        out << "doc " << escape_id(doc_ids_[d]) << " " << doc_lengths_[d] << "\n";
    }
    for (const auto& term : terms) {
        out << "term " << term;
        for (const Posting& p : postings_.at(term)) out << " " << p.doc << ":" << p.tf;
        out << "\n";
    }
    std::string body = out.str();
    body += "checksum=" + to_hex16(fnv1a64(body)) + "\n";
    write_file_atomic(path, body);
}

Index Index::load(const std::filesystem::path& path) {
    std::string content = read_file(path);
    auto lines = split_lines(content);
    if (lines.size() < 2) throw IndexFormatError("truncated index file");

    const std::string& last = lines.back();
    if (!starts_with(last, "checksum=")) throw IndexFormatError("missing checksum line");
    size_t body_size = content.rfind("checksum=");
    std::string expected = last.substr(9);
    std::string actual = to_hex16(fnv1a64(std::string_view(content).substr(0, body_size)));
    if (expected != actual) throw IndexFormatError("index checksum mismatch");

    std::istringstream header(lines.front());
    std::string tag, version, docs_field, terms_field;
    header >> tag >> version >> docs_field >> terms_field;
    if (tag != "index" || !starts_with(version, "v=")) {
        throw IndexFormatError("not an index file");
    }
    if (version != "v=1") throw IndexFormatError("unsupported index version " + version);

    std::size_t n_docs = std::stoull(docs_field.substr(docs_field.find('=') + 1));
    std::size_t n_terms = std::stoull(terms_field.substr(terms_field.find('=') + 1));
    if (lines.size() != 2 + n_docs + n_terms) throw IndexFormatError("line count mismatch");

    Index index;
    std::uint64_t total_length = 0;
    for (std::size_t i = 0; i < n_docs; ++i) {
        std::istringstream line(lines[1 + i]);
        std::string kind, id;
        std::uint32_t length = 0;
        line >> kind >> id >> length;
        if (kind != "doc") throw IndexFormatError("expected doc line");
        index.doc_ids_.push_back(unescape_id(id));
        index.doc_lengths_.push_back(length);
        total_length += length;
    }
    for (std::size_t i = 0; i < n_terms; ++i) {
        std::istringstream line(lines[1 + n_docs + i]);
        std::string kind, term;
        line >> kind >> term;
        if (kind != "term") throw IndexFormatError("expected term line");
        auto& list = index.postings_[term];
        std::string cell;
        while (line >> cell) {
            auto colon = cell.find(':');
            if (colon == std::string::npos) throw IndexFormatError("bad posting " + cell);
            list.push_back(Posting{static_cast<std::uint32_t>(std::stoul(cell.substr(0, colon))),
                                   static_cast<std::uint32_t>(std::stoul(cell.substr(colon + 1)))});
        }
        if (list.empty()) throw IndexFormatError("empty postings for " + term);
    }
    index.avg_doc_length_ =
        n_docs == 0 ? 0.0 : static_cast<double>(total_length) / static_cast<double>(n_docs);
    return index;
}

}  // namespace promptopt

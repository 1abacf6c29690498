// SPDX-License-Identifier: Apache-2.0
#include "gridforge/sources.hpp"

#include "gridforge/csv.hpp"
#include "gridforge/tz.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <fstream>
#include <thread>

namespace gridforge {

namespace fs = std::filesystem;

namespace {

// --- encodings -------------------------------------------------------------

// Returns the byte offset of the first invalid UTF-8 sequence, or npos.
std::size_t utf8_invalid_at(std::string_view bytes)
{
    std::size_t i = 0;
    const std::size_t n = bytes.size();
    while (i < n) {
        unsigned char c = bytes[i];
        std::size_t len;
        if (c < 0x80)
            len = 1;
        else if ((c & 0xe0) == 0xc0)
            len = 2;
        else if ((c & 0xf0) == 0xe0)
            len = 3;
        else if ((c & 0xf8) == 0xf0)
            len = 4;
        else
            return i;
        if (i + len > n)
            return i;
        for (std::size_t k = 1; k < len; ++k)
            if ((static_cast<unsigned char>(bytes[i + k]) & 0xc0) != 0x80)
                return i;
        // Reject overlong encodings of the common cases.
        if (len == 2 && c < 0xc2)
            return i;
        i += len;
    }
    return std::string_view::npos;
}

std::string latin1_to_utf8(std::string_view bytes)
{
    std::string out;
    out.reserve(bytes.size());
    for (unsigned char c : bytes) {
        if (c < 0x80) {
            out += static_cast<char>(c);
        } else {
            out += static_cast<char>(0xc0 | (c >> 6));
            out += static_cast<char>(0x80 | (c & 0x3f));
        }
    }
    return out;
}

std::string utf8_to_latin1(std::string_view text)
{
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        unsigned char c = text[i];
        if (c < 0x80) {
            out += static_cast<char>(c);
            ++i;
        } else if ((c & 0xe0) == 0xc0 && i + 1 < text.size()) {
            unsigned cp = ((c & 0x1f) << 6) | (static_cast<unsigned char>(text[i + 1]) & 0x3f);
            if (cp > 0xff)
                throw ParseError("character U+" + std::to_string(cp) +
                                 " not representable in latin-1");
            out += static_cast<char>(cp);
            i += 2;
        } else {
            throw ParseError("character not representable in latin-1");
        }
    }
    return out;
}

// --- descriptor json helpers ------------------------------------------------

using nlohmann::json;

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> known,
                         const std::string& context)
{
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find_if(known.begin(), known.end(), [&](const char* k) {
                return it.key() == k;
            }) == known.end())
            throw ConfigError(context + ": unknown key \"" + it.key() + "\"");
    }
}

char single_char(const json& v, const std::string& context)
{
    if (!v.is_string() || v.get<std::string>().size() != 1)
        throw ConfigError(context + ": expected a single character");
    return v.get<std::string>()[0];
}

bool valid_source_id(const std::string& id)
{
    return !id.empty() && std::all_of(id.begin(), id.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '_' || c == '-';
    });
}

UtcTime utc_now()
{
    return UtcTime{std::chrono::duration_cast<std::chrono::seconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count()};
}

// Advisory lock on a cache directory; mkdir is atomic on POSIX filesystems.
class DirLock {
public:
    explicit DirLock(const fs::path& dir) : path_(dir / ".lock")
    {
        for (int attempt = 0; attempt < 500; ++attempt) {
            std::error_code ec;
            if (fs::create_directory(path_, ec))
                return;
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
        throw IoError("could not acquire cache lock at " + path_.string());
    }
    ~DirLock()
    {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

private:
    fs::path path_;
};

} // namespace

// ---------------------------------------------------------------------------
// Dialect / SourceDescriptor

void Dialect::validate() const
{
    if (delimiter == decimal_separator)
        throw ConfigError("delimiter equals decimal separator");
    if (thousands_separator && *thousands_separator == decimal_separator)
        throw ConfigError("thousands separator equals decimal separator");
    if (header_rows < 0)
        throw ConfigError("header_rows must be non-negative");
}

SourceDescriptor descriptor_from_json(const json& doc, const std::string& context)
{
    if (!doc.is_object())
        throw ConfigError(context + ": descriptor must be a JSON object");
    reject_unknown_keys(
        doc, {"id", "origin", "dialect", "column_map", "vocab_map_id", "timezone", "notes"},
        context);

    SourceDescriptor desc;
    if (!doc.contains("id") || !doc["id"].is_string())
        throw ConfigError(context + ": missing string key \"id\"");
    desc.id = doc["id"].get<std::string>();
    if (!valid_source_id(desc.id))
        throw ConfigError(context + ": invalid source id \"" + desc.id + "\"");
    if (!doc.contains("origin") || !doc["origin"].is_string())
        throw ConfigError(context + ": missing string key \"origin\"");
    desc.origin = doc["origin"].get<std::string>();

    if (doc.contains("dialect")) {
        const json& d = doc["dialect"];
        if (!d.is_object())
            throw ConfigError(context + ": \"dialect\" must be an object");
        reject_unknown_keys(d,
                            {"delimiter", "decimal_separator", "thousands_separator",
                             "encoding", "header_rows", "na_tokens"},
                            context + ".dialect");
        if (d.contains("delimiter"))
            desc.dialect.delimiter = single_char(d["delimiter"], context + ".delimiter");
        if (d.contains("decimal_separator"))
            desc.dialect.decimal_separator =
                single_char(d["decimal_separator"], context + ".decimal_separator");
        if (d.contains("thousands_separator") && !d["thousands_separator"].is_null())
            desc.dialect.thousands_separator =
                single_char(d["thousands_separator"], context + ".thousands_separator");
        if (d.contains("encoding")) {
            std::string enc = d["encoding"].is_string() ? d["encoding"].get<std::string>() : "";
            if (enc == "utf-8")
                desc.dialect.encoding = Encoding::utf8;
            else if (enc == "latin-1")
                desc.dialect.encoding = Encoding::latin1;
            else
                throw ConfigError(context + ": unsupported encoding \"" + enc +
                                  "\" (use \"utf-8\" or \"latin-1\")");
        }
        if (d.contains("header_rows")) {
            if (!d["header_rows"].is_number_integer())
                throw ConfigError(context + ": header_rows must be an integer");
            desc.dialect.header_rows = d["header_rows"].get<int>();
        }
        if (d.contains("na_tokens")) {
            if (!d["na_tokens"].is_array())
                throw ConfigError(context + ": na_tokens must be an array of strings");
            desc.dialect.na_tokens.clear();
            for (const json& t : d["na_tokens"]) {
                if (!t.is_string())
                    throw ConfigError(context + ": na_tokens must be an array of strings");
                desc.dialect.na_tokens.insert(t.get<std::string>());
            }
        }
    }
    desc.dialect.validate();

    if (doc.contains("column_map")) {
        if (!doc["column_map"].is_array())
            throw ConfigError(context + ": column_map must be an array of [source, canonical]");
        std::set<std::string> canonical_seen;
        for (const json& pair : doc["column_map"]) {
            if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string() ||
                !pair[1].is_string())
                throw ConfigError(context +
                                  ": column_map entries must be [source, canonical] pairs");
            std::string canonical = pair[1].get<std::string>();
            if (!canonical_seen.insert(canonical).second)
                throw ConfigError(context + ": duplicate canonical column \"" + canonical +
                                  "\"");
            desc.column_map.emplace_back(pair[0].get<std::string>(), std::move(canonical));
        }
    }

    if (doc.contains("vocab_map_id")) {
        if (!doc["vocab_map_id"].is_string())
            throw ConfigError(context + ": vocab_map_id must be a string");
        desc.vocab_map_id = doc["vocab_map_id"].get<std::string>();
    }
    if (doc.contains("timezone")) {
        if (!doc["timezone"].is_string())
            throw ConfigError(context + ": timezone must be a string");
        desc.timezone = doc["timezone"].get<std::string>();
    }
    TimeZone::load(desc.timezone); // resolvability check
    if (doc.contains("notes")) {
        if (!doc["notes"].is_string())
            throw ConfigError(context + ": notes must be a string");
        desc.notes = doc["notes"].get<std::string>();
    }
    return desc;
}

SourceDescriptor load_descriptor(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open descriptor " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("descriptor " + path.string() + ": " + e.what());
    }
    return descriptor_from_json(doc, path.filename().string());
}

// ---------------------------------------------------------------------------
// Table parsing

std::size_t RawTable::column_index(std::string_view name) const
{
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name)
            return i;
    throw InvalidArgument("table has no column \"" + std::string(name) + "\"");
}

RawTable parse_table(std::string_view bytes, const Dialect& dialect,
                     const std::vector<std::pair<std::string, std::string>>& column_map,
                     std::string source_id)
{
    dialect.validate();
    std::string decoded;
    std::string_view text;
    if (dialect.encoding == Encoding::latin1) {
        decoded = latin1_to_utf8(bytes);
        text = decoded;
    } else {
        if (std::size_t at = utf8_invalid_at(bytes); at != std::string_view::npos)
            throw ParseError("undecodable utf-8 byte at offset " + std::to_string(at));
        text = bytes;
    }

    auto records = csv::parse(text, dialect.delimiter);
    const std::size_t header_rows = static_cast<std::size_t>(dialect.header_rows);
    if (records.size() < header_rows)
        throw ParseError("input has " + std::to_string(records.size()) +
                         " rows but dialect expects " + std::to_string(header_rows) +
                         " header rows");

    // With several header rows the last one names the columns; anything
    // above it is preamble.
    std::vector<std::string> header;
    std::size_t width = 0;
    if (header_rows > 0) {
        header = records[header_rows - 1];
        width = header.size();
    } else if (records.size() > 0) {
        width = records[0].size();
    }

    RawTable table;
    table.source_id = std::move(source_id);
    std::vector<std::size_t> pick;
    for (const auto& [src, canonical] : column_map) {
        std::size_t idx = width;
        if (header_rows > 0) {
            for (std::size_t i = 0; i < header.size(); ++i) {
                if (header[i] == src) {
                    idx = i;
                    break;
                }
            }
        } else {
            // Headerless sources address columns by zero-based index.
            std::size_t v = 0;
            auto res = std::from_chars(src.data(), src.data() + src.size(), v);
            if (res.ec == std::errc{} && res.ptr == src.data() + src.size())
                idx = v;
        }
        if (idx >= width)
            throw ParseError("mapped column \"" + src + "\" missing from header");
        pick.push_back(idx);
        table.columns.push_back(canonical);
    }

    for (std::size_t r = header_rows; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.size() != width)
            throw ParseError("ragged row at row " + std::to_string(r - header_rows + 1) +
                             ": expected " + std::to_string(width) + " cells, found " +
                             std::to_string(rec.size()));
        std::vector<std::optional<std::string>> row;
        row.reserve(pick.size());
        for (std::size_t idx : pick) {
            const std::string& cell = rec[idx];
            if (dialect.na_tokens.count(cell))
                row.emplace_back(std::nullopt);
            else
                row.emplace_back(cell);
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string write_table(const RawTable& table, const Dialect& dialect)
{
    dialect.validate();
    if (dialect.na_tokens.empty())
        throw InvalidArgument("dialect has no NA token to render missing cells");
    const std::string& na = *dialect.na_tokens.begin();
    std::string out;
    csv::append_record(out, table.columns, dialect.delimiter);
    std::vector<std::string> rendered;
    for (const auto& row : table.rows) {
        rendered.clear();
        for (const auto& cell : row)
            rendered.push_back(cell ? *cell : na);
        csv::append_record(out, rendered, dialect.delimiter);
    }
    if (dialect.encoding == Encoding::latin1)
        return utf8_to_latin1(out);
    return out;
}

std::optional<double> parse_number(const std::optional<std::string>& cell,
                                   const Dialect& dialect)
{
    if (!cell)
        return std::nullopt;
    std::string_view s = trim(*cell);
    if (s.empty())
        throw ParseError("not a number: \"" + *cell + "\"", *cell);

    std::string normalized;
    normalized.reserve(s.size());
    if (s[0] == '+' || s[0] == '-') {
        if (s[0] == '-')
            normalized += '-';
        s.remove_prefix(1);
    }

    // Thousands separators may only group the integer part, three digits a
    // group; anything else is malformed, not quietly stripped.
    if (dialect.thousands_separator &&
        s.find(*dialect.thousands_separator) != std::string_view::npos) {
        char thou = *dialect.thousands_separator;
        std::size_t int_end = s.find_first_of(std::string{dialect.decimal_separator} + "eE");
        std::string_view int_part = s.substr(0, int_end);
        std::size_t group_start = 0;
        bool first = true;
        while (true) {
            std::size_t sep = int_part.find(thou, group_start);
            std::string_view group = int_part.substr(
                group_start, sep == std::string_view::npos ? sep : sep - group_start);
            bool digits = !group.empty() &&
                          std::all_of(group.begin(), group.end(), [](unsigned char c) {
                              return std::isdigit(c);
                          });
            if (!digits || (!first && group.size() != 3) || (first && group.size() > 3))
                throw ParseError("not a number: \"" + *cell + "\"", *cell);
            normalized.append(group);
            if (sep == std::string_view::npos)
                break;
            group_start = sep + 1;
            first = false;
        }
        if (int_end == std::string_view::npos)
            s = {};
        else
            s = s.substr(int_end);
        if (!s.empty() && s.find(thou) != std::string_view::npos)
            throw ParseError("not a number: \"" + *cell + "\"", *cell);
    }

    bool seen_decimal = false;
    bool seen_exponent = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (std::isdigit(static_cast<unsigned char>(c))) {
            normalized += c;
        } else if (c == dialect.decimal_separator && !seen_decimal && !seen_exponent) {
            seen_decimal = true;
            normalized += '.';
        } else if ((c == 'e' || c == 'E') && !seen_exponent) {
            seen_exponent = true;
            normalized += 'e';
            if (i + 1 < s.size() && (s[i + 1] == '+' || s[i + 1] == '-')) {
                normalized += s[i + 1];
                ++i;
            }
        } else {
            throw ParseError("not a number: \"" + *cell + "\"", *cell);
        }
    }

    try {
        return parse_double_strict(normalized);
    } catch (const ParseError&) {
        throw ParseError("not a number: \"" + *cell + "\"", *cell);
    }
}

// ---------------------------------------------------------------------------
// Snapshot cache

SnapshotCache::SnapshotCache(fs::path dir) : dir_(std::move(dir))
{
    fs::create_directories(dir_);
    load_index();
}

void SnapshotCache::load_index()
{
    entries_.clear();
    fs::path index = dir_ / "index.json";
    if (!fs::exists(index))
        return;
    std::ifstream in(index, std::ios::binary);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw IoError("corrupt cache index " + index.string() + ": " + e.what());
    }
    for (const json& e : doc.value("entries", json::array())) {
        CacheEntry entry;
        entry.source_id = e.at("source_id").get<std::string>();
        entry.retrieved_at = UtcTime::parse_iso(e.at("retrieved_at").get<std::string>());
        entry.content_hash = e.at("content_hash").get<std::string>();
        entry.stored_path = e.at("stored_path").get<std::string>();
        entries_.push_back(std::move(entry));
    }
}

void SnapshotCache::save_index() const
{
    json arr = json::array();
    for (const CacheEntry& e : entries_) {
        arr.push_back({{"source_id", e.source_id},
                       {"retrieved_at", e.retrieved_at.to_iso()},
                       {"content_hash", e.content_hash},
                       {"stored_path", e.stored_path}});
    }
    json doc{{"entries", arr}};
    fs::path tmp = dir_ / "index.json.tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << doc.dump(2) << '\n';
        if (!out)
            throw IoError("cannot write cache index in " + dir_.string());
    }
    fs::rename(tmp, dir_ / "index.json");
}

CacheEntry SnapshotCache::snapshot(const std::string& source_id, std::string_view bytes)
{
    if (!valid_source_id(source_id))
        throw ConfigError("invalid source id \"" + source_id + "\"");
    DirLock lock(dir_);
    load_index(); // another process may have added entries

    std::string hash = sha256_hex(bytes);
    std::string rel = source_id + "/" + hash + ".raw";
    fs::path stored = dir_ / rel;

    if (fs::exists(stored)) {
        std::ifstream in(stored, std::ios::binary);
        std::string existing((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
        if (existing != bytes)
            throw Error("content hash collision in snapshot cache for " + rel);
    } else {
        fs::create_directories(stored.parent_path());
        fs::path tmp = stored;
        tmp += ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
            if (!out)
                throw IoError("cannot write snapshot " + stored.string());
        }
        fs::rename(tmp, stored);
    }

    for (const CacheEntry& e : entries_)
        if (e.source_id == source_id && e.content_hash == hash)
            return e;

    CacheEntry entry{source_id, utc_now(), hash, rel};
    entries_.push_back(entry);
    save_index();
    return entry;
}

std::optional<CacheEntry> SnapshotCache::latest(const std::string& source_id) const
{
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it)
        if (it->source_id == source_id)
            return *it;
    return std::nullopt;
}

std::vector<CacheEntry> SnapshotCache::entries() const
{
    return entries_;
}

std::string SnapshotCache::read(const CacheEntry& entry) const
{
    std::ifstream in(dir_ / entry.stored_path, std::ios::binary);
    if (!in)
        throw IoError("missing snapshot " + entry.stored_path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (sha256_hex(bytes) != entry.content_hash)
        throw Error("snapshot " + entry.stored_path + " does not match its recorded hash");
    return bytes;
}

CacheEntry snapshot_source(const SourceDescriptor& desc, std::string_view bytes,
                           const fs::path& cache_dir)
{
    SnapshotCache cache(cache_dir);
    return cache.snapshot(desc.id, bytes);
}

} // namespace gridforge

// SPDX-License-Identifier: Apache-2.0
#include "gridforge/pipeline.hpp"

#include "gridforge/capacity.hpp"
#include "gridforge/csv.hpp"
#include "gridforge/plants.hpp"
#include "gridforge/taxonomy.hpp"
#include "gridforge/timeseries.hpp"
#include "gridforge/tz.hpp"
#include "gridforge/weather.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <set>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

namespace gridforge {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config and logging

PipelineConfig PipelineConfig::load(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open config " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    if (!doc.is_object())
        throw ConfigError("config " + path.string() + " must be a JSON object");
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        static const std::set<std::string> known = {"package_name", "version", "created",
                                                    "sources",      "pipeline", "options",
                                                    "output_dir"};
        if (!known.count(it.key()))
            throw ConfigError("config: unknown key \"" + it.key() + "\"");
    }

    PipelineConfig config;
    config.base_dir = fs::absolute(path).parent_path();
    config.package_name = doc.at("package_name").get<std::string>();
    config.version = doc.at("version").get<std::string>();
    if (doc.contains("created"))
        config.created = UtcTime::parse_iso(doc["created"].get<std::string>());
    for (const json& s : doc.at("sources"))
        config.source_paths.emplace_back(s.get<std::string>());
    config.pipeline = doc.at("pipeline").get<std::string>();
    static const std::set<std::string> pipelines = {"timeseries", "plants", "capacity",
                                                    "weather"};
    if (!pipelines.count(config.pipeline))
        throw ConfigError("config: unknown pipeline \"" + config.pipeline + "\"");
    if (doc.contains("options")) {
        if (!doc["options"].is_object())
            throw ConfigError("config: options must be an object");
        config.options = doc["options"];
    }
    config.output_dir = fs::path(doc.at("output_dir").get<std::string>());

    for (const fs::path& p : config.source_paths)
        if (!fs::exists(config.resolve(p)))
            throw ConfigError("config references missing descriptor " + p.string());
    return config;
}

fs::path PipelineConfig::resolve(const fs::path& p) const
{
    return p.is_absolute() ? p : base_dir / p;
}

void EventLog::emit(std::string_view event, json fields) const
{
    if (!out_)
        return;
    fields["event"] = std::string(event);
    *out_ << fields.dump() << '\n';
}

// ---------------------------------------------------------------------------
// Shared helpers

namespace {

class OutputLock {
public:
    explicit OutputLock(const fs::path& dir) : path_(dir / ".gridforge.lock")
    {
        fs::create_directories(dir);
        std::error_code ec;
        if (!fs::create_directory(path_, ec))
            throw ConfigError("output directory " + dir.string() +
                              " is locked by another build");
    }
    ~OutputLock()
    {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

private:
    fs::path path_;
};

std::string fetch_http(const std::string& origin)
{
    std::string rest, host, target;
    bool https = false;
    if (origin.rfind("https://", 0) == 0) {
        rest = origin.substr(8);
        https = true;
    } else {
        rest = origin.substr(7);
    }
    std::size_t slash = rest.find('/');
    host = rest.substr(0, slash);
    target = slash == std::string::npos ? "/" : rest.substr(slash);

    auto get = [&](auto& client) -> std::string {
        client.set_follow_location(true);
        auto res = client.Get(target);
        if (!res)
            throw IoError("fetch failed for " + origin);
        if (res->status != 200)
            throw IoError("fetch of " + origin + " returned status " +
                          std::to_string(res->status));
        return res->body;
    };
    if (https) {
        httplib::SSLClient client(host);
        return get(client);
    }
    httplib::Client client(host);
    return get(client);
}

std::string read_origin(const SourceDescriptor& desc, const fs::path& descriptor_path,
                        bool offline)
{
    if (desc.origin.rfind("http://", 0) == 0 || desc.origin.rfind("https://", 0) == 0) {
        if (offline)
            throw ConfigError("source \"" + desc.id + "\" needs a fetch of " + desc.origin +
                              " but --offline is set");
        return fetch_http(desc.origin);
    }
    fs::path p(desc.origin);
    if (p.is_relative())
        p = descriptor_path.parent_path() / p;
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw IoError("source \"" + desc.id + "\": cannot read origin " + p.string());
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

struct LoadedSource {
    SourceDescriptor desc;
    std::string bytes; // latest snapshot content
};

std::vector<LoadedSource> load_sources(const PipelineConfig& config, SnapshotCache& cache)
{
    std::vector<LoadedSource> sources;
    std::set<std::string> ids;
    for (const fs::path& p : config.source_paths) {
        LoadedSource s;
        s.desc = load_descriptor(config.resolve(p));
        if (!ids.insert(s.desc.id).second)
            throw ConfigError("duplicate source id \"" + s.desc.id + "\" in one run");
        auto entry = cache.latest(s.desc.id);
        if (!entry)
            throw ConfigError("no snapshot for source \"" + s.desc.id +
                              "\"; run ingest first");
        s.bytes = cache.read(*entry);
        sources.push_back(std::move(s));
    }
    return sources;
}

std::optional<std::string> cell_at(const RawTable& table, std::size_t row,
                                   std::size_t column)
{
    return table.rows[row][column];
}

std::optional<std::size_t> find_column(const RawTable& table, std::string_view name)
{
    for (std::size_t i = 0; i < table.columns.size(); ++i)
        if (table.columns[i] == name)
            return i;
    return std::nullopt;
}

Date parse_date_cell(const std::string& cell)
{
    // Plant lists carry either full dates or bare commissioning years.
    if (cell.size() == 4)
        return Date::from_civil(static_cast<int>(parse_int_strict(cell)), 1, 1);
    return Date::parse_iso(cell);
}

bool parse_bool_cell(const std::string& cell)
{
    std::string v = lower_ascii(trim(cell));
    if (v == "true" || v == "yes" || v == "1")
        return true;
    if (v == "false" || v == "no" || v == "0")
        return false;
    throw ParseError("not a boolean: \"" + cell + "\"", cell);
}

// --- taxonomy / vocabulary plumbing ---------------------------------------

Taxonomy load_taxonomy_option(const PipelineConfig& config)
{
    if (!config.options.contains("taxonomy"))
        throw ConfigError("pipeline \"" + config.pipeline +
                          "\" needs options.taxonomy (path to the taxonomy file)");
    return Taxonomy::load(config.resolve(config.options["taxonomy"].get<std::string>()));
}

std::map<std::string, VocabMapping> load_vocab_option(const PipelineConfig& config,
                                                      const Taxonomy& taxonomy)
{
    std::map<std::string, VocabMapping> out;
    if (!config.options.contains("vocab"))
        return out;
    for (const auto& [id, path] : config.options["vocab"].items()) {
        VocabMapping m = VocabMapping::load(config.resolve(path.get<std::string>()));
        if (m.id != id)
            throw ConfigError("vocab file for \"" + id + "\" declares id \"" + m.id + "\"");
        auto problems = validate_mapping(m, taxonomy);
        if (!problems.empty())
            throw ConfigError(problems.front());
        out.emplace(id, std::move(m));
    }
    return out;
}

std::string classify_term(const std::string& term, const SourceDescriptor& desc,
                          const std::map<std::string, VocabMapping>& vocab,
                          const Taxonomy& taxonomy, bool allow_unmapped, MarkerSet& markers,
                          const std::optional<std::string>& context = std::nullopt)
{
    if (!desc.vocab_map_id)
        throw ConfigError("source \"" + desc.id + "\" has no vocab_map_id but needs one");
    auto it = vocab.find(*desc.vocab_map_id);
    if (it == vocab.end())
        throw ConfigError("vocab mapping \"" + *desc.vocab_map_id +
                          "\" not configured in options.vocab");
    try {
        return classify(term, it->second, taxonomy, context);
    } catch (const UnmappedTermError&) {
        if (!allow_unmapped)
            throw;
        markers.add(MarkerFlag::own_calculation);
        return "other_or_unspecified";
    }
}

// --- plant records ----------------------------------------------------------

std::vector<PlantRecord> plant_records_from_table(
    const RawTable& table, const SourceDescriptor& desc,
    const std::map<std::string, VocabMapping>& vocab, const Taxonomy& taxonomy,
    const std::string& default_country, bool allow_unmapped, const EventLog& log)
{
    auto col = [&](std::string_view name) { return find_column(table, name); };
    auto required = [&](std::string_view name) {
        auto idx = col(name);
        if (!idx)
            throw ConfigError("source \"" + desc.id + "\" does not map a \"" +
                              std::string(name) + "\" column");
        return *idx;
    };

    std::size_t c_id = required("record_id");
    std::size_t c_name = required("name");
    std::size_t c_source = required("energy_source");
    auto c_country = col("country");
    auto c_tech = col("technology");
    auto c_net = col("capacity_net_mw");
    auto c_gross = col("capacity_gross_mw");
    auto c_chp = col("chp");
    auto c_comm = col("commissioned");
    auto c_decomm = col("decommissioned");
    auto c_lat = col("lat");
    auto c_lon = col("lon");
    auto c_geo = col("geo_precision");
    auto c_eic = col("eic");
    auto c_eff = col("efficiency");

    std::vector<PlantRecord> records;
    records.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        PlantRecord rec;
        auto str = [&](std::optional<std::size_t> c) -> std::optional<std::string> {
            if (!c)
                return std::nullopt;
            return cell_at(table, r, *c);
        };
        auto num = [&](std::optional<std::size_t> c) -> std::optional<double> {
            if (!c)
                return std::nullopt;
            return parse_number(cell_at(table, r, *c), desc.dialect);
        };

        auto id_cell = cell_at(table, r, c_id);
        if (!id_cell)
            throw ParseError("source \"" + desc.id + "\" row " + std::to_string(r + 1) +
                             ": record_id is NA");
        rec.record_id = *id_cell;
        rec.name = cell_at(table, r, c_name).value_or("");
        rec.country = str(c_country).value_or(default_country);
        auto term = cell_at(table, r, c_source);
        if (!term)
            throw ParseError("source \"" + desc.id + "\" row " + std::to_string(r + 1) +
                             ": energy_source is NA");
        rec.technology = str(c_tech).value_or("");
        // The technology label doubles as a context tag: it is what lets a
        // generic term like "Windenergie" land on onshore vs offshore.
        std::optional<std::string> context;
        if (!rec.technology.empty())
            context = rec.technology;
        rec.source_node = classify_term(*term, desc, vocab, taxonomy, allow_unmapped,
                                        rec.markers, context);
        rec.capacity_net_mw = num(c_net);
        rec.capacity_gross_mw = num(c_gross);
        if (auto v = str(c_chp))
            rec.chp = parse_bool_cell(*v);
        if (auto v = str(c_comm))
            rec.commissioned = parse_date_cell(*v);
        if (auto v = str(c_decomm))
            rec.decommissioned = parse_date_cell(*v);
        rec.lat = num(c_lat);
        rec.lon = num(c_lon);
        if (auto v = str(c_geo)) {
            rec.geo_precision = geo_precision_from_string(*v);
            if (!rec.geo_precision)
                throw ParseError("unknown geo precision \"" + *v + "\"", *v);
        }
        rec.eic = str(c_eic);
        rec.efficiency = num(c_eff);
        rec.provenance = {desc.id};
        for (std::size_t c = 0; c < table.columns.size(); ++c)
            if (table.rows[r][c])
                rec.field_provenance[table.columns[c]] = desc.id;

        auto problems = validate_record(rec);
        for (const std::string& p : problems) {
            rec.markers.add(MarkerFlag::implausible);
            rec.quality_flags.push_back("invariant:" + p);
            log.emit("record_invariant_violation",
                     {{"source", desc.id}, {"record", rec.record_id}, {"problem", p}});
        }
        records.push_back(std::move(rec));
    }
    return records;
}

// --- package assembly -------------------------------------------------------

UtcTime meta_created(const PipelineConfig& config)
{
    if (config.created)
        return *config.created;
    // Versions follow the release-date convention; fall back to the epoch so
    // builds stay reproducible without wall-clock input.
    try {
        Date d = Date::parse_iso(config.version);
        return UtcTime{static_cast<std::int64_t>(d.days) * 86400};
    } catch (const ParseError&) {
        return UtcTime{0};
    }
}

PackageMeta make_meta(const PipelineConfig& config, const std::vector<LoadedSource>& sources)
{
    PackageMeta meta;
    meta.name = config.package_name;
    meta.version = config.version;
    meta.created = meta_created(config);
    meta.description = "Built by the gridforge " + config.pipeline + " pipeline.";
    std::vector<std::pair<std::string, std::string>> titled;
    for (const LoadedSource& s : sources)
        titled.emplace_back(s.desc.id, s.desc.origin);
    std::sort(titled.begin(), titled.end());
    meta.sources = std::move(titled);
    return meta;
}

int finish_package(const PipelineConfig& config, const PackageMeta& meta,
                   const std::vector<std::pair<Resource, std::vector<Row>>>& resources,
                   const fs::path& out_dir, const EventLog& log)
{
    write_package(out_dir, meta, resources);
    auto issues = validate_package(out_dir);
    if (!issues.empty()) {
        for (const auto& i : issues)
            log.emit("package_invalid", {{"path", i.path}, {"message", i.message}});
        return exit_data_error;
    }
    StampResult stamp = version_stamp(out_dir, config.version);
    json resource_names = json::array();
    for (const auto& [r, rows] : resources)
        resource_names.push_back({{"name", r.name}, {"rows", rows.size()}});
    log.emit("package_written", {{"id", stamp.stable_id},
                                 {"dir", out_dir.string()},
                                 {"resources", resource_names}});
    return exit_ok;
}

FieldSchema string_field(std::string name, std::string description = {})
{
    FieldSchema f;
    f.name = std::move(name);
    f.type = FieldType::string_type;
    f.description = std::move(description);
    return f;
}

FieldSchema number_field(std::string name, std::optional<std::string> unit = {},
                         std::string description = {})
{
    FieldSchema f;
    f.name = std::move(name);
    f.type = FieldType::number;
    f.unit = std::move(unit);
    f.description = std::move(description);
    return f;
}

CellValue opt_cell(const std::optional<double>& v)
{
    if (!v)
        return std::monostate{};
    return *v;
}

CellValue opt_cell(const std::optional<std::string>& v)
{
    if (!v)
        return std::monostate{};
    return *v;
}

// ---------------------------------------------------------------------------
// Timeseries pipeline

struct BuiltSeries {
    std::string id;
    TimeSeries series;
    std::optional<TimeSeries> profile;
};

TimeSeries series_from_source(const LoadedSource& source, int resolution_minutes,
                              const EventLog& log)
{
    RawTable table = parse_table(source.bytes, source.desc.dialect, source.desc.column_map,
                                 source.desc.id);
    std::size_t c_ts = table.column_index("timestamp");
    std::size_t c_val = table.column_index("value");

    LocalStampColumn column;
    column.zone = source.desc.timezone;
    column.stamps.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        auto cell = cell_at(table, r, c_ts);
        if (!cell)
            throw ParseError("source \"" + source.desc.id + "\" row " + std::to_string(r + 1) +
                             ": timestamp is NA");
        column.stamps.push_back(CivilTime::parse(*cell));
    }
    std::vector<UtcTime> instants = to_utc(column);

    const std::int64_t step = static_cast<std::int64_t>(resolution_minutes) * 60;
    if (instants.empty())
        throw ParseError("source \"" + source.desc.id + "\" has no rows");
    UtcTime start = instants.front();
    if (start.seconds % step != 0)
        throw ParseError("source \"" + source.desc.id + "\" does not start on the " +
                         std::to_string(resolution_minutes) + "-minute grid (" +
                         start.to_iso() + ")");
    std::int64_t span = instants.back().seconds - start.seconds;
    if (span % step != 0)
        throw ParseError("source \"" + source.desc.id + "\" ends off the grid");
    std::size_t n = static_cast<std::size_t>(span / step) + 1;

    std::vector<std::optional<double>> values(n, std::nullopt);
    std::size_t missing_rows = n - instants.size();
    for (std::size_t r = 0; r < instants.size(); ++r) {
        std::int64_t offset = instants[r].seconds - start.seconds;
        if (offset % step != 0)
            throw ParseError("source \"" + source.desc.id + "\" row " + std::to_string(r + 1) +
                             " at " + instants[r].to_iso() + " is off the " +
                             std::to_string(resolution_minutes) + "-minute grid");
        values[static_cast<std::size_t>(offset / step)] =
            parse_number(cell_at(table, r, c_val), source.desc.dialect);
    }
    if (missing_rows > 0)
        log.emit("grid_holes_filled_as_na",
                 {{"source", source.desc.id}, {"missing_rows", missing_rows}});
    return TimeSeries::make(source.desc.id, resolution_minutes, start, std::move(values));
}

int build_timeseries(const PipelineConfig& config, const std::vector<LoadedSource>& sources,
                     const fs::path& out_dir, const BuildFlags& flags, const EventLog& log)
{
    const int resolution = config.options.value("resolution_minutes", 60);
    if (resolution != 15 && resolution != 30 && resolution != 60)
        throw ConfigError("options.resolution_minutes must be 15, 30 or 60");
    const int max_gap = config.options.value("max_gap_minutes", 120);
    const bool aggregate = config.options.value("aggregate_to_hourly", true);
    const std::string unit = config.options.value("unit", std::string("MW"));

    // Plant-list sources feed capacity profiles, not series of their own.
    std::set<std::string> plant_source_ids;
    if (config.options.contains("profiles"))
        for (const json& p : config.options["profiles"])
            plant_source_ids.insert(p.at("plants").get<std::string>());
    std::vector<const LoadedSource*> series_sources;
    for (const LoadedSource& s : sources)
        if (!plant_source_ids.count(s.desc.id))
            series_sources.push_back(&s);
    if (series_sources.empty())
        throw ConfigError("timeseries build has no series sources");

    auto process = [&](const LoadedSource& source) {
        TimeSeries ts = series_from_source(source, resolution, log);
        std::size_t na_before = std::count_if(ts.values.begin(), ts.values.end(),
                                              [](const auto& v) { return !v; });
        ts = fill_gaps(ts, max_gap);
        std::size_t na_after = std::count_if(ts.values.begin(), ts.values.end(),
                                             [](const auto& v) { return !v; });
        if (na_before != na_after)
            log.emit("gaps_interpolated", {{"source", source.desc.id},
                                           {"points", na_before - na_after},
                                           {"max_gap_minutes", max_gap}});
        if (aggregate && ts.resolution_minutes < 60)
            ts = aggregate_to_hourly(ts);
        return ts;
    };

    std::vector<BuiltSeries> built(series_sources.size());
    if (flags.jobs > 1) {
        std::vector<std::future<TimeSeries>> futures;
        futures.reserve(series_sources.size());
        for (const LoadedSource* s : series_sources)
            futures.push_back(std::async(std::launch::async, process, std::cref(*s)));
        for (std::size_t i = 0; i < series_sources.size(); ++i)
            built[i] = {series_sources[i]->desc.id, futures[i].get(), std::nullopt};
    } else {
        for (std::size_t i = 0; i < series_sources.size(); ++i)
            built[i] = {series_sources[i]->desc.id, process(*series_sources[i]), std::nullopt};
    }

    // Optional capacity profiles: generation divided by the fleet's
    // installed capacity on the containing UTC day.
    if (config.options.contains("profiles")) {
        Taxonomy taxonomy = load_taxonomy_option(config);
        auto vocab = load_vocab_option(config, taxonomy);
        std::string default_country = config.options.value("country", std::string{});
        std::map<std::string, const LoadedSource*> by_id;
        for (const LoadedSource& s : sources)
            by_id[s.desc.id] = &s;
        for (const json& p : config.options["profiles"]) {
            std::string series_id = p.at("series").get<std::string>();
            std::string plants_id = p.at("plants").get<std::string>();
            std::string grouping = p.at("grouping").get<std::string>();
            auto series_it = std::find_if(built.begin(), built.end(),
                                          [&](const auto& b) { return b.id == series_id; });
            if (series_it == built.end())
                throw ConfigError("profile references unknown series \"" + series_id + "\"");
            auto plants_it = by_id.find(plants_id);
            if (plants_it == by_id.end())
                throw ConfigError("profile references unknown plants source \"" + plants_id +
                                  "\"");
            if (!taxonomy.contains(grouping))
                throw ConfigError("profile grouping \"" + grouping +
                                  "\" is not a taxonomy node");

            const LoadedSource& plants_src = *plants_it->second;
            RawTable table = parse_table(plants_src.bytes, plants_src.desc.dialect,
                                         plants_src.desc.column_map, plants_src.desc.id);
            auto records =
                plant_records_from_table(table, plants_src.desc, vocab, taxonomy,
                                         default_country, flags.allow_unmapped, log);
            const TimeSeries& gen = series_it->series;
            Date first = gen.time_at(0).date();
            Date last = gen.time_at(gen.size() - 1).date();
            DailyCapacityIssues issues;
            DailyCapacitySeries cap =
                build_daily_capacity(records, grouping, taxonomy, first, last, &issues);
            for (const std::string& id : issues.missing_commissioned)
                log.emit("capacity_record_excluded",
                         {{"record", id}, {"reason", "missing commissioning date"}});
            for (const std::string& id : issues.missing_capacity)
                log.emit("capacity_record_excluded",
                         {{"record", id}, {"reason", "missing capacity"}});
            series_it->profile = capacity_profile(gen, cap);
        }
    }

    std::vector<BuiltSeries> kept = std::move(built);
    std::sort(kept.begin(), kept.end(),
              [](const BuiltSeries& a, const BuiltSeries& b) { return a.id < b.id; });

    const int out_resolution = kept.front().series.resolution_minutes;
    for (const auto& b : kept)
        if (b.series.resolution_minutes != out_resolution)
            throw ConfigError("series resolutions diverge; cannot combine into one resource");
    const std::int64_t step = static_cast<std::int64_t>(out_resolution) * 60;

    UtcTime axis_start = kept.front().series.start;
    UtcTime axis_end = kept.front().series.time_at(kept.front().series.size() - 1);
    for (const auto& b : kept) {
        axis_start = std::min(axis_start, b.series.start);
        axis_end = std::max(axis_end, b.series.time_at(b.series.size() - 1));
    }
    const std::size_t rows_n =
        static_cast<std::size_t>((axis_end.seconds - axis_start.seconds) / step) + 1;

    Resource resource;
    resource.name = "time_series_" + std::to_string(out_resolution) + "min";
    resource.path = resource.name + ".csv";
    resource.schema.push_back(
        {"utc_timestamp", FieldType::datetime, "Start of the interval in UTC", std::nullopt,
         {}});
    for (const auto& b : kept) {
        resource.schema.push_back(number_field(b.id, unit));
        resource.schema.push_back(string_field(b.id + "_marker"));
        resource.marker_companions[b.id] = b.id + "_marker";
        if (b.profile) {
            resource.schema.push_back(number_field(b.id + "_profile", std::nullopt,
                                                   "Share of installed capacity"));
            resource.schema.push_back(string_field(b.id + "_profile_marker"));
            resource.marker_companions[b.id + "_profile"] = b.id + "_profile_marker";
        }
    }

    std::vector<Row> rows;
    rows.reserve(rows_n);
    for (std::size_t i = 0; i < rows_n; ++i) {
        UtcTime t{axis_start.seconds + static_cast<std::int64_t>(i) * step};
        Row row;
        row.push_back(t);
        for (const auto& b : kept) {
            auto append_point = [&](const TimeSeries& ts) {
                std::int64_t offset = t.seconds - ts.start.seconds;
                if (offset < 0 || offset % step != 0 ||
                    static_cast<std::size_t>(offset / step) >= ts.size()) {
                    row.push_back(std::monostate{});
                    row.push_back(std::monostate{});
                    return;
                }
                std::size_t idx = static_cast<std::size_t>(offset / step);
                row.push_back(opt_cell(ts.values[idx]));
                row.push_back(ts.markers[idx]);
            };
            append_point(b.series);
            if (b.profile)
                append_point(*b.profile);
        }
        rows.push_back(std::move(row));
    }

    std::vector<std::pair<Resource, std::vector<Row>>> resources;
    resources.emplace_back(std::move(resource), std::move(rows));
    return finish_package(config, make_meta(config, sources), resources, out_dir, log);
}

// ---------------------------------------------------------------------------
// Plants pipeline

json match_report_to_json(const MatchReport& report)
{
    json matched = json::array();
    for (const auto& m : report.matched)
        matched.push_back({{"primary", m.primary_id},
                           {"secondary", m.secondary_id},
                           {"matcher", to_string(m.matcher)}});
    json ambiguities = json::array();
    for (const auto& a : report.ambiguities)
        ambiguities.push_back({{"record", a.record_id},
                               {"side", a.side},
                               {"candidates", a.candidates},
                               {"matcher", to_string(a.matcher)}});
    json conflicts = json::array();
    for (const auto& c : report.conflicts)
        conflicts.push_back({{"record", c.record_id},
                             {"field", c.field},
                             {"kept", c.kept},
                             {"discarded", c.discarded}});
    return {{"matched", matched}, {"ambiguities", ambiguities}, {"conflicts", conflicts}};
}

json overlap_report_to_json(const OverlapReport& report)
{
    json moves = json::array();
    for (const auto& m : report.moves)
        moves.push_back({{"record", m.record_id}, {"from", m.from}});
    json duplicates = json::array();
    for (const auto& d : report.duplicates)
        duplicates.push_back({{"conventional", d.conventional_id},
                              {"renewable", d.renewable_id},
                              {"reason", d.reason}});
    return {{"moves", moves}, {"duplicates", duplicates}};
}

Resource plant_resource(const std::string& name)
{
    Resource r;
    r.name = name;
    r.path = name + ".csv";
    r.schema = {
        string_field("record_id"),
        string_field("name"),
        string_field("country", "ISO 3166-1 alpha-2"),
        string_field("energy_source", "Taxonomy node id"),
        string_field("technology"),
        number_field("capacity_net_mw", "MW"),
        number_field("capacity_gross_mw", "MW"),
        {"chp", FieldType::boolean, "Combined heat and power capability", std::nullopt, {}},
        {"commissioned", FieldType::date, "", std::nullopt, {}},
        {"decommissioned", FieldType::date, "", std::nullopt, {}},
        number_field("lat", "deg"),
        number_field("lon", "deg"),
        string_field("geo_precision"),
        string_field("eic", "Energy Identification Code"),
        number_field("efficiency"),
        string_field("provenance", "Source ids, primary first"),
        string_field("field_provenance", "field=source pairs"),
        string_field("quality_flags", "Violated plausibility rules"),
        string_field("marker"),
    };
    r.schema[12].constraints.enum_values = {"district_centroid", "exact", "zip_centroid"};
    r.marker_companions["record_id"] = "marker";
    return r;
}

Row plant_row(const PlantRecord& rec)
{
    auto join = [](const std::vector<std::string>& parts) {
        std::string out;
        for (const auto& p : parts) {
            if (!out.empty())
                out += ';';
            out += p;
        }
        return out;
    };
    std::vector<std::string> provenance_pairs;
    for (const auto& [field, src] : rec.field_provenance)
        provenance_pairs.push_back(field + "=" + src);

    Row row;
    row.push_back(rec.record_id);
    row.push_back(rec.name);
    row.push_back(rec.country);
    row.push_back(rec.source_node);
    row.push_back(rec.technology);
    row.push_back(opt_cell(rec.capacity_net_mw));
    row.push_back(opt_cell(rec.capacity_gross_mw));
    row.push_back(rec.chp ? CellValue(*rec.chp) : CellValue(std::monostate{}));
    row.push_back(rec.commissioned ? CellValue(*rec.commissioned)
                                   : CellValue(std::monostate{}));
    row.push_back(rec.decommissioned ? CellValue(*rec.decommissioned)
                                     : CellValue(std::monostate{}));
    row.push_back(opt_cell(rec.lat));
    row.push_back(opt_cell(rec.lon));
    row.push_back(rec.geo_precision ? CellValue(to_string(*rec.geo_precision))
                                    : CellValue(std::monostate{}));
    row.push_back(opt_cell(rec.eic));
    row.push_back(opt_cell(rec.efficiency));
    row.push_back(join(rec.provenance));
    row.push_back(join(provenance_pairs));
    row.push_back(join(rec.quality_flags));
    row.push_back(rec.markers);
    return row;
}

RuleSet rules_from_options(const json& options)
{
    RuleSet rules;
    if (!options.contains("rules"))
        return rules;
    for (const json& r : options["rules"]) {
        PlausibilityRule rule;
        rule.id = r.at("id").get<std::string>();
        rule.field = r.at("field").get<std::string>();
        if (r.contains("min"))
            rule.min = r["min"].get<double>();
        if (r.contains("max"))
            rule.max = r["max"].get<double>();
        if (r.contains("node"))
            rule.node = r["node"].get<std::string>();
        rules.rules.push_back(std::move(rule));
    }
    return rules;
}

int build_plants(const PipelineConfig& config, const std::vector<LoadedSource>& sources,
                 const fs::path& out_dir, const BuildFlags& flags, const EventLog& log)
{
    Taxonomy taxonomy = load_taxonomy_option(config);
    auto vocab = load_vocab_option(config, taxonomy);
    const std::string default_country = config.options.value("country", std::string{});

    if (!config.options.contains("primary"))
        throw ConfigError("plants pipeline needs options.primary (source id)");
    std::string primary_id = config.options["primary"].get<std::string>();
    std::optional<std::string> secondary_id;
    if (config.options.contains("secondary"))
        secondary_id = config.options["secondary"].get<std::string>();
    std::set<std::string> renewable_ids;
    if (config.options.contains("renewables"))
        for (const json& r : config.options["renewables"])
            renewable_ids.insert(r.get<std::string>());

    std::map<std::string, std::vector<PlantRecord>> records_by_source;
    for (const LoadedSource& s : sources) {
        RawTable table = parse_table(s.bytes, s.desc.dialect, s.desc.column_map, s.desc.id);
        records_by_source[s.desc.id] = plant_records_from_table(
            table, s.desc, vocab, taxonomy, default_country, flags.allow_unmapped, log);
    }
    auto take = [&](const std::string& id) {
        auto it = records_by_source.find(id);
        if (it == records_by_source.end())
            throw ConfigError("options reference source \"" + id +
                              "\" that is not in the source list");
        return it->second;
    };

    MatchPolicy policy;
    if (config.options.contains("match_tolerance"))
        policy.capacity_tolerance = config.options["match_tolerance"].get<double>();
    MatchReport match_report;
    std::vector<PlantRecord> conventional;
    if (secondary_id) {
        conventional = merge_lists(take(primary_id), take(*secondary_id), policy,
                                   match_report);
        log.emit("lists_merged", {{"primary", primary_id},
                                  {"secondary", *secondary_id},
                                  {"matched", match_report.matched.size()},
                                  {"ambiguous", match_report.ambiguities.size()},
                                  {"conflicts", match_report.conflicts.size()}});
    } else {
        conventional = take(primary_id);
    }

    std::vector<PlantRecord> renewable;
    for (const std::string& id : renewable_ids) {
        auto recs = take(id);
        renewable.insert(renewable.end(), recs.begin(), recs.end());
    }
    std::sort(renewable.begin(), renewable.end(),
              [](const PlantRecord& a, const PlantRecord& b) {
                  return a.record_id < b.record_id;
              });

    OverlapReport overlap;
    dedupe_cross_domain(conventional, renewable, taxonomy, overlap,
                        policy.capacity_tolerance);
    if (!overlap.moves.empty() || !overlap.duplicates.empty())
        log.emit("cross_domain_overlap", {{"moves", overlap.moves.size()},
                                          {"duplicates", overlap.duplicates.size()}});

    RuleSet rules = rules_from_options(config.options);
    std::vector<RuleViolation> violations;
    conventional = flag_implausible(std::move(conventional), rules, taxonomy, &violations);
    renewable = flag_implausible(std::move(renewable), rules, taxonomy, &violations);
    for (const auto& v : violations)
        log.emit("implausible_flagged", {{"record", v.record_id}, {"rule", v.rule_id}});

    std::vector<Row> conv_rows, ren_rows;
    for (const auto& r : conventional)
        conv_rows.push_back(plant_row(r));
    for (const auto& r : renewable)
        ren_rows.push_back(plant_row(r));

    std::vector<std::pair<Resource, std::vector<Row>>> resources;
    resources.emplace_back(plant_resource("conventional_power_plants"),
                           std::move(conv_rows));
    resources.emplace_back(plant_resource("renewable_power_plants"), std::move(ren_rows));

    int code = finish_package(config, make_meta(config, sources), resources, out_dir, log);
    if (code == exit_ok) {
        fs::create_directories(out_dir / "reports");
        auto dump = [&](const std::string& name, const json& doc) {
            std::ofstream out(out_dir / "reports" / name, std::ios::binary | std::ios::trunc);
            out << doc.dump(2) << '\n';
        };
        dump("match_report.json", match_report_to_json(match_report));
        dump("overlap_report.json", overlap_report_to_json(overlap));
    }
    return code;
}

// ---------------------------------------------------------------------------
// Capacity pipeline

int build_capacity(const PipelineConfig& config, const std::vector<LoadedSource>& sources,
                   const fs::path& out_dir, const BuildFlags& flags, const EventLog& log)
{
    Taxonomy taxonomy = load_taxonomy_option(config);
    auto vocab = load_vocab_option(config, taxonomy);
    const std::string default_country = config.options.value("country", std::string{});

    std::vector<CapacityObservation> observations;
    for (const LoadedSource& s : sources) {
        double factor = 1.0;
        if (config.options.contains("unit_factors") &&
            config.options["unit_factors"].contains(s.desc.id))
            factor = config.options["unit_factors"][s.desc.id].get<double>();
        RawTable table = parse_table(s.bytes, s.desc.dialect, s.desc.column_map, s.desc.id);
        std::size_t c_country = table.column_index("country");
        std::size_t c_year = table.column_index("year");
        std::size_t c_term = table.column_index("energy_source");
        std::size_t c_value = table.column_index("value");
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
            CapacityObservation obs;
            obs.country = cell_at(table, r, c_country).value_or(default_country);
            auto year_cell = cell_at(table, r, c_year);
            if (!year_cell)
                throw ParseError("source \"" + s.desc.id + "\" row " + std::to_string(r + 1) +
                                 ": year is NA");
            obs.year = static_cast<int>(parse_int_strict(*year_cell));
            auto term = cell_at(table, r, c_term);
            if (!term)
                throw ParseError("source \"" + s.desc.id + "\" row " + std::to_string(r + 1) +
                                 ": energy_source is NA");
            MarkerSet markers;
            obs.node = classify_term(*term, s.desc, vocab, taxonomy, flags.allow_unmapped,
                                     markers);
            obs.source = s.desc.id;
            auto value = parse_number(cell_at(table, r, c_value), s.desc.dialect);
            if (value)
                obs.value_gw = *value * factor;
            observations.push_back(std::move(obs));
        }
    }

    auto problems = validate_observations(observations, taxonomy);
    if (!problems.empty()) {
        for (const auto& p : problems)
            log.emit("observation_invalid", {{"problem", p}});
        return exit_data_error;
    }
    if (config.options.contains("roll_up_level"))
        observations =
            roll_up(observations, config.options["roll_up_level"].get<int>(), taxonomy);

    CapacityMatrix matrix = build_matrix(observations);

    Resource resource;
    resource.name = "national_generation_capacity";
    resource.path = resource.name + ".csv";
    resource.schema.push_back(string_field("country", "ISO 3166-1 alpha-2"));
    resource.schema.push_back({"year", FieldType::integer, "", std::nullopt, {}});
    resource.schema.push_back(string_field("energy_source", "Taxonomy node id"));
    for (const std::string& src : matrix.sources) {
        resource.schema.push_back(number_field(src, "GW"));
        resource.schema.push_back(
            {src + "_incomplete", FieldType::boolean,
             "True when this source misses technologies that others report", std::nullopt,
             {}});
    }

    std::vector<Row> rows;
    rows.reserve(matrix.rows.size());
    for (std::size_t r = 0; r < matrix.rows.size(); ++r) {
        Row row;
        row.push_back(matrix.rows[r].country);
        row.push_back(static_cast<std::int64_t>(matrix.rows[r].year));
        row.push_back(matrix.rows[r].node);
        for (std::size_t c = 0; c < matrix.sources.size(); ++c) {
            row.push_back(opt_cell(matrix.cells[r][c]));
            if (matrix.cells[r][c])
                row.push_back(static_cast<bool>(matrix.incomplete[r][c]));
            else
                row.push_back(std::monostate{});
        }
        rows.push_back(std::move(row));
    }

    std::vector<std::pair<Resource, std::vector<Row>>> resources;
    resources.emplace_back(std::move(resource), std::move(rows));
    return finish_package(config, make_meta(config, sources), resources, out_dir, log);
}

// ---------------------------------------------------------------------------
// Weather pipeline

int build_weather(const PipelineConfig& config, const std::vector<LoadedSource>& sources,
                  const fs::path& out_dir, const EventLog& log)
{
    const bool derive = config.options.value("derive_wind_speed", true);
    const bool keep_components = config.options.value("keep_components", false);
    std::optional<BoundingBox> box;
    if (config.options.contains("bounding_box")) {
        const json& b = config.options["bounding_box"];
        BoundingBox bb;
        bb.ne_lat = b.at("ne")[0].get<double>();
        bb.ne_lon = b.at("ne")[1].get<double>();
        bb.sw_lat = b.at("sw")[0].get<double>();
        bb.sw_lon = b.at("sw")[1].get<double>();
        bb.validate();
        box = bb;
    }

    std::optional<GridSpec> spec;
    std::vector<GridField> fields;
    for (const LoadedSource& s : sources) {
        WeatherContainer container;
        try {
            container = WeatherContainer::from_json(json::parse(s.bytes));
        } catch (const json::parse_error& e) {
            throw ParseError("source \"" + s.desc.id + "\" is not a gridded container: " +
                             e.what());
        }
        GridSpec effective = container.grid;
        for (const GridField& f : container.fields) {
            GridField field = f;
            if (box) {
                SubsetResult sub = subset(f, container.grid, *box);
                field = std::move(sub.field);
                effective = sub.spec;
            }
            fields.push_back(std::move(field));
        }
        if (!spec)
            spec = effective;
        else if (!(*spec == effective))
            throw ConfigError("weather sources disagree on the grid after subsetting");
    }
    if (!spec)
        throw ConfigError("weather build has no sources");
    log.emit("weather_grid", {{"nx", spec->nx}, {"ny", spec->ny}, {"fields", fields.size()}});

    if (derive) {
        std::vector<GridField> derived;
        std::set<std::size_t> used;
        for (std::size_t i = 0; i < fields.size(); ++i) {
            for (std::size_t j = 0; j < fields.size(); ++j) {
                if (fields[i].time != fields[j].time)
                    continue;
                GridField speed;
                try {
                    speed = wind_speed(fields[i], fields[j]);
                } catch (const InvalidArgument&) {
                    continue; // not a matching u/v pair
                }
                derived.push_back(std::move(speed));
                used.insert(i);
                used.insert(j);
            }
        }
        std::vector<GridField> next;
        for (std::size_t i = 0; i < fields.size(); ++i)
            if (keep_components || !used.count(i))
                next.push_back(std::move(fields[i]));
        for (auto& d : derived)
            next.push_back(std::move(d));
        fields = std::move(next);
    }

    FlatTable table = flatten_to_table(fields, *spec);

    Resource resource;
    resource.name = "weather_data";
    resource.path = resource.name + ".csv";
    resource.schema.push_back(
        {"utc_timestamp", FieldType::datetime, "", std::nullopt, {}});
    resource.schema.push_back(number_field("lat", "deg"));
    resource.schema.push_back(number_field("lon", "deg"));
    for (std::size_t c = 3; c < table.columns.size(); ++c) {
        WeatherParameter p = weather_parameter_from_string(table.columns[c]);
        resource.schema.push_back(number_field(table.columns[c], unit_of(p)));
    }

    std::vector<Row> rows;
    rows.reserve(table.rows.size());
    for (const auto& r : table.rows) {
        Row row;
        row.push_back(r.time);
        row.push_back(r.lat);
        row.push_back(r.lon);
        for (const auto& v : r.values)
            row.push_back(opt_cell(v));
        rows.push_back(std::move(row));
    }

    std::vector<std::pair<Resource, std::vector<Row>>> resources;
    resources.emplace_back(std::move(resource), std::move(rows));
    return finish_package(config, make_meta(config, sources), resources, out_dir, log);
}

} // namespace

// ---------------------------------------------------------------------------
// Commands

int cmd_ingest(const PipelineConfig& config, const fs::path& cache_dir, bool offline,
               const EventLog& log)
{
    SnapshotCache cache(cache_dir);
    std::size_t before = cache.entries().size();
    int failures = 0;
    for (const fs::path& path : config.source_paths) {
        fs::path resolved = config.resolve(path);
        try {
            SourceDescriptor desc = load_descriptor(resolved);
            std::string bytes = read_origin(desc, resolved, offline);
            CacheEntry entry = cache.snapshot(desc.id, bytes);
            log.emit("snapshot", {{"source", desc.id},
                                  {"content_hash", entry.content_hash},
                                  {"stored_path", entry.stored_path},
                                  {"bytes", bytes.size()}});
        } catch (const Error& e) {
            ++failures;
            log.emit("ingest_error", {{"descriptor", resolved.string()}, {"error", e.what()}});
        }
    }
    std::size_t added = cache.entries().size() - before;
    log.emit("ingest_summary", {{"sources", config.source_paths.size()},
                                {"new_entries", added},
                                {"failures", failures}});
    return failures > 0 ? exit_config_error : exit_ok;
}

int cmd_build(const PipelineConfig& config, const fs::path& cache_dir,
              const BuildFlags& flags, const EventLog& log)
{
    fs::path out_dir = config.resolve(config.output_dir);
    OutputLock lock(out_dir);
    SnapshotCache cache(cache_dir);
    std::vector<LoadedSource> sources = load_sources(config, cache);
    log.emit("build_start", {{"pipeline", config.pipeline},
                             {"package", config.package_name},
                             {"version", config.version},
                             {"sources", sources.size()}});
    if (config.pipeline == "timeseries")
        return build_timeseries(config, sources, out_dir, flags, log);
    if (config.pipeline == "plants")
        return build_plants(config, sources, out_dir, flags, log);
    if (config.pipeline == "capacity")
        return build_capacity(config, sources, out_dir, flags, log);
    if (config.pipeline == "weather")
        return build_weather(config, sources, out_dir, log);
    throw ConfigError("unknown pipeline \"" + config.pipeline + "\"");
}

int cmd_validate(const fs::path& package_dir, std::ostream& out)
{
    if (!fs::exists(package_dir / "datapackage.json")) {
        out << package_dir.string() << ": descriptor datapackage.json missing\n";
        return exit_config_error;
    }
    auto issues = validate_package(package_dir);
    for (const auto& i : issues) {
        out << i.path;
        if (i.row)
            out << ":row " << *i.row;
        if (i.column)
            out << ":column " << *i.column;
        out << ": " << i.message << '\n';
    }
    if (issues.empty()) {
        out << "valid: " << package_dir.string() << '\n';
        return exit_ok;
    }
    return exit_data_error;
}

// ---------------------------------------------------------------------------
// Diff

namespace {

struct LoadedPackage {
    json descriptor;
    std::map<std::string, std::vector<std::vector<std::string>>> tables; // by resource name
    std::map<std::string, json> schemas;
};

LoadedPackage load_package(const fs::path& dir)
{
    LoadedPackage p;
    std::ifstream in(dir / "datapackage.json", std::ios::binary);
    p.descriptor = json::parse(in);
    for (const json& res : p.descriptor["resources"]) {
        std::string name = res["name"].get<std::string>();
        std::ifstream file(dir / res["path"].get<std::string>(), std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(file)),
                          std::istreambuf_iterator<char>());
        p.tables[name] = csv::parse(bytes, ',');
        p.schemas[name] = res["schema"];
    }
    return p;
}

} // namespace

int cmd_diff(const fs::path& dir_a, const fs::path& dir_b, std::ostream& out)
{
    for (const fs::path& dir : {dir_a, dir_b}) {
        if (!fs::exists(dir / "datapackage.json")) {
            out << dir.string() << ": descriptor datapackage.json missing\n";
            return exit_config_error;
        }
        auto issues = validate_package(dir);
        if (!issues.empty()) {
            out << dir.string() << ": package invalid: " << issues.front().message << '\n';
            return exit_data_error;
        }
    }

    LoadedPackage a = load_package(dir_a);
    LoadedPackage b = load_package(dir_b);

    json report;
    report["package_a"] = a.descriptor["name"];
    report["package_b"] = b.descriptor["name"];
    json resources = json::array();

    std::set<std::string> names;
    for (const auto& [name, _] : a.tables)
        names.insert(name);
    for (const auto& [name, _] : b.tables)
        names.insert(name);

    for (const std::string& name : names) {
        json entry;
        entry["name"] = name;
        bool in_a = a.tables.count(name) > 0;
        bool in_b = b.tables.count(name) > 0;
        if (!in_a || !in_b) {
            entry["status"] = in_a ? "removed" : "added";
            resources.push_back(std::move(entry));
            continue;
        }

        json schema_changes = json::array();
        if (a.schemas[name] != b.schemas[name]) {
            std::set<std::string> fields_a, fields_b;
            for (const json& f : a.schemas[name]["fields"])
                fields_a.insert(f["name"].get<std::string>());
            for (const json& f : b.schemas[name]["fields"])
                fields_b.insert(f["name"].get<std::string>());
            for (const auto& f : fields_a)
                if (!fields_b.count(f))
                    schema_changes.push_back("field removed: " + f);
            for (const auto& f : fields_b)
                if (!fields_a.count(f))
                    schema_changes.push_back("field added: " + f);
            if (schema_changes.empty())
                schema_changes.push_back("field definitions changed");
        }
        entry["schema_changes"] = schema_changes;

        const auto& ta = a.tables[name];
        const auto& tb = b.tables[name];
        std::size_t common_rows = std::min(ta.size(), tb.size());
        std::size_t changed = 0;
        json details = json::array();
        for (std::size_t r = 1; r < common_rows; ++r) { // row 0 is the header
            std::size_t width = std::min(ta[r].size(), tb[r].size());
            for (std::size_t c = 0; c < width; ++c) {
                if (ta[r][c] == tb[r][c])
                    continue;
                ++changed;
                if (details.size() < 20) {
                    std::string column = c < ta[0].size() ? ta[0][c] : std::to_string(c + 1);
                    details.push_back({{"row", r},
                                       {"column", column},
                                       {"a", ta[r][c]},
                                       {"b", tb[r][c]}});
                }
            }
            changed += std::max(ta[r].size(), tb[r].size()) - width;
        }
        entry["cells_changed"] = changed;
        entry["rows_added"] = tb.size() > ta.size() ? tb.size() - ta.size() : 0;
        entry["rows_removed"] = ta.size() > tb.size() ? ta.size() - tb.size() : 0;
        entry["changes"] = details;
        entry["status"] = (changed == 0 && entry["rows_added"] == 0 &&
                           entry["rows_removed"] == 0 && schema_changes.empty())
                              ? "unchanged"
                              : "changed";
        resources.push_back(std::move(entry));
    }
    report["resources"] = std::move(resources);
    out << report.dump(2) << '\n';
    return exit_ok;
}

} // namespace gridforge

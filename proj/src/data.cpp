#include "dtwin/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "dtwin/csv.hpp"
#include "dtwin/error.hpp"

namespace dtwin {

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

std::string format_number(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

}  // namespace

void DataChannel::push(double t, double v) {
    if (!history.empty() && !(t > history.back().first)) {
        throw ValidationError("channel '" + name + "': time " + format_number(t) + " is not after " +
                              format_number(history.back().first));
    }
    history.emplace_back(t, v);
    value = v;
}

std::size_t TimeSeries::update_count() const {
    std::size_t n = 0;
    for (const auto& s : slots) n += s.updates.size();
    return n;
}

TimeSeries parse_timeseries_csv(const TimeSeriesSpec& spec) {
    auto in = open_input(spec.path);
    return parse_timeseries_csv(in, spec);
}

TimeSeries parse_timeseries_csv(std::istream& in, const TimeSeriesSpec& spec) {
    if (!(spec.schedule > 0.0)) throw ValidationError("schedule must be > 0");
    TimeSeries out;
    const CsvTable table = parse_csv(in);
    if (table.header.empty()) {
        out.diagnostics.push_back({0, "empty file"});
        return out;
    }
    const int tcol = table.column(spec.time_column);
    if (tcol < 0) throw ValidationError("time column '" + spec.time_column + "' not in header");
    std::vector<int> vcols;
    for (const auto& c : spec.value_columns) {
        const int k = table.column(c);
        if (k < 0) throw ValidationError("value column '" + c + "' not in header");
        vcols.push_back(k);
    }

    std::optional<double> t0;
    double last_t = 0.0;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const int line = table.row_lines[r];
        double t = 0.0;
        if (static_cast<std::size_t>(tcol) >= row.size() || !parse_double(row[static_cast<std::size_t>(tcol)], t)) {
            out.diagnostics.push_back({line, "non-numeric time, row skipped"});
            continue;
        }
        std::vector<double> vals;
        bool ok = true;
        for (int k : vcols) {
            double v = 0.0;
            if (static_cast<std::size_t>(k) >= row.size() || !parse_double(row[static_cast<std::size_t>(k)], v)) {
                out.diagnostics.push_back({line, "non-numeric value in column '" + table.header[static_cast<std::size_t>(k)] +
                                                     "', row skipped"});
                ok = false;
                break;
            }
            vals.push_back(v);
        }
        if (!ok) continue;
        if (t0 && !(t > last_t)) {
            throw ValidationError("time column not increasing at line " + std::to_string(line));
        }
        if (!t0) t0 = t;
        last_t = t;
        const double index = std::floor((t - *t0) / spec.schedule);
        const double start = *t0 + index * spec.schedule;
        if (out.slots.empty() || out.slots.back().start != start) out.slots.push_back({start, {}});
        for (std::size_t i = 0; i < vals.size(); ++i) {
            out.slots.back().updates.push_back({t, spec.value_columns[i], vals[i]});
        }
    }
    return out;
}

TabularSource TabularSource::load(const TabularSpec& spec) {
    auto in = open_input(spec.path);
    return parse(in, spec.columns);
}

TabularSource TabularSource::parse(std::istream& in, const std::vector<std::string>& columns) {
    TabularSource src;
    src.columns_ = columns;
    const CsvTable table = parse_csv(in);
    std::vector<int> idx;
    for (const auto& c : columns) {
        const int k = table.column(c);
        if (k < 0) throw ValidationError("unknown column '" + c + "'");
        idx.push_back(k);
    }
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        std::vector<double> tuple;
        bool ok = true;
        for (int k : idx) {
            double v = 0.0;
            if (static_cast<std::size_t>(k) >= table.rows[r].size() ||
                !parse_double(table.rows[r][static_cast<std::size_t>(k)], v)) {
                src.diagnostics_.push_back({table.row_lines[r], "non-numeric cell, row skipped"});
                ok = false;
                break;
            }
            tuple.push_back(v);
        }
        if (ok) src.rows_.push_back(std::move(tuple));
    }
    return src;
}

std::optional<std::vector<double>> TabularSource::next() {
    if (next_ >= rows_.size()) return std::nullopt;
    return rows_[next_++];
}

void SensorQueue::push(SensorPoint p) {
    std::lock_guard lock(mutex_);
    points_.push_back(std::move(p));
}

std::vector<SensorPoint> SensorQueue::drain() {
    std::lock_guard lock(mutex_);
    std::vector<SensorPoint> out(std::make_move_iterator(points_.begin()), std::make_move_iterator(points_.end()));
    points_.clear();
    return out;
}

std::size_t SensorQueue::size() const {
    std::lock_guard lock(mutex_);
    return points_.size();
}

SensorReplay read_sensor_replay(const std::filesystem::path& path) {
    auto in = open_input(path);
    return parse_sensor_replay(in);
}

SensorReplay parse_sensor_replay(std::istream& in) {
    SensorReplay out;
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto f = split_csv_line(line);
        SensorPoint p;
        if (f.size() != 3 || !parse_double(f[0], p.timestamp) || !parse_double(f[2], p.value) ||
            f[1].empty()) {
            // a header line is tolerated
            if (out.points.empty() && out.malformed == 0 && f.size() == 3 && f[0] == "timestamp") continue;
            ++out.malformed;
            out.diagnostics.push_back({n, "malformed sensor point"});
            continue;
        }
        p.sensor_id = f[1];
        out.points.push_back(std::move(p));
    }
    return out;
}

std::vector<std::string> DisplayBinding::bound_channels() const {
    switch (kind) {
        case DisplayKind::dynamic_text: return {channel};
        case DisplayKind::graph: return channels;
        default: return {};
    }
}

const char* display_kind_name(DisplayKind k) {
    switch (k) {
        case DisplayKind::text: return "text";
        case DisplayKind::dynamic_text: return "dynamic_text";
        case DisplayKind::image: return "image";
        case DisplayKind::graph: return "graph";
    }
    return "?";
}

DisplayKind parse_display_kind(const std::string& s) {
    for (auto k : {DisplayKind::text, DisplayKind::dynamic_text, DisplayKind::image, DisplayKind::graph}) {
        if (s == display_kind_name(k)) return k;
    }
    throw ValidationError("unknown display kind '" + s + "'");
}

const char* graph_kind_name(GraphKind k) { return k == GraphKind::line ? "line" : "bar"; }

GraphKind parse_graph_kind(const std::string& s) {
    if (s == "line") return GraphKind::line;
    if (s == "bar") return GraphKind::bar;
    throw ValidationError("unknown graph kind '" + s + "' (line or bar)");
}

json display_to_json(const DisplayBinding& d) {
    json j = {{"id", d.id}, {"kind", display_kind_name(d.kind)}};
    switch (d.kind) {
        case DisplayKind::text: j["text"] = d.text; break;
        case DisplayKind::dynamic_text: j["channel"] = d.channel; break;
        case DisplayKind::image: j["path"] = d.path; break;
        case DisplayKind::graph:
            j["channels"] = d.channels;
            j["graph_kind"] = graph_kind_name(d.graph_kind);
            break;
    }
    return j;
}

DisplayBinding display_from_json(const json& j) {
    DisplayBinding d;
    d.id = j.value("id", "");
    d.kind = parse_display_kind(j.at("kind").get<std::string>());
    switch (d.kind) {
        case DisplayKind::text: d.text = j.at("text").get<std::string>(); break;
        case DisplayKind::dynamic_text: d.channel = j.at("channel").get<std::string>(); break;
        case DisplayKind::image: d.path = j.at("path").get<std::string>(); break;
        case DisplayKind::graph:
            d.channels = j.at("channels").get<std::vector<std::string>>();
            if (d.channels.empty()) throw ValidationError("graph display needs at least one channel");
            d.graph_kind = parse_graph_kind(j.value("graph_kind", "line"));
            break;
    }
    return d;
}

DataChannel& DataEngine::add_channel(const std::string& name, const std::string& unit) {
    if (constants_.count(name)) throw ValidationError("'" + name + "' is already a constant");
    auto [it, fresh] = channels_.try_emplace(name);
    if (fresh) it->second.name = name;
    if (!unit.empty()) it->second.unit = unit;
    return it->second;
}

void DataEngine::set_constant(const std::string& name, double value) {
    if (channels_.count(name)) throw ValidationError("'" + name + "' is already a channel");
    if (!std::isfinite(value)) throw ValidationError("constant '" + name + "' is not finite");
    constants_[name] = value;
    dirty_.push_back("");
}

void DataEngine::add_derived(const std::string& name, const std::string& expression, const std::string& unit) {
    if (derived_.count(name)) throw ValidationError("derived channel '" + name + "' defined twice");
    Expression e = Expression::parse(expression);
    add_channel(name, unit);
    derived_[name] = {std::move(e), {}};
    bound_ = false;
}

void DataEngine::add_timeseries(const TimeSeries& series) {
    for (const auto& slot : series.slots) {
        for (const auto& u : slot.updates) add_channel(u.channel);
    }
    std::deque<TimeSlot> merged;
    std::merge(pending_slots_.begin(), pending_slots_.end(), series.slots.begin(), series.slots.end(),
               std::back_inserter(merged), [](const TimeSlot& a, const TimeSlot& b) { return a.start < b.start; });
    pending_slots_ = std::move(merged);
    for (const auto& d : series.diagnostics) diagnostics_.push_back(d);
}

void DataEngine::add_tabular(TabularSource source) {
    for (const auto& c : source.columns()) add_channel(c);
    for (const auto& d : source.diagnostics()) diagnostics_.push_back(d);
    tabular_.push_back(std::move(source));
}

std::shared_ptr<SensorQueue> DataEngine::add_sensor_stream(std::map<std::string, std::string> channel_map) {
    for (const auto& [sensor, ch] : channel_map) {
        if (ch.empty()) throw ValidationError("sensor '" + sensor + "' maps to an empty channel name");
        add_channel(ch);
    }
    auto q = std::make_shared<SensorQueue>();
    sensors_.push_back({std::move(channel_map), q});
    return q;
}

void DataEngine::add_sensor_replay(const SensorReplay& replay, std::map<std::string, std::string> channel_map) {
    add_sensor_stream(std::move(channel_map));
    auto& s = sensors_.back();
    s.replay = replay.points;
    sensor_dropped_ += replay.malformed;
    for (const auto& d : replay.diagnostics) diagnostics_.push_back(d);
}

void DataEngine::add_display(DisplayBinding display) {
    displays_.push_back(std::move(display));
    bound_ = false;
}

void DataEngine::bind() {
    for (auto& [name, d] : derived_) {
        d.inputs = d.expr.identifiers();
        for (const auto& id : d.inputs) {
            if (!channels_.count(id) && !constants_.count(id)) {
                throw ValidationError("derived channel '" + name + "': unknown identifier '" + id + "'");
            }
        }
    }
    // depth-first topological order; grey marks detect cycles
    order_.clear();
    std::map<std::string, int> mark;
    std::vector<std::string> stack;
    std::function<void(const std::string&)> visit = [&](const std::string& n) {
        const int m = mark[n];
        if (m == 2) return;
        if (m == 1) {
            auto it = std::find(stack.begin(), stack.end(), n);
            std::string cycle;
            for (; it != stack.end(); ++it) cycle += *it + " -> ";
            throw ValidationError("dependency cycle among derived channels: " + cycle + n);
        }
        mark[n] = 1;
        stack.push_back(n);
        for (const auto& in : derived_.at(n).inputs) {
            if (derived_.count(in)) visit(in);
        }
        stack.pop_back();
        mark[n] = 2;
        order_.push_back(n);
    };
    for (const auto& [name, d] : derived_) visit(name);

    for (const auto& disp : displays_) {
        for (const auto& ch : disp.bound_channels()) {
            if (!channels_.count(ch)) {
                throw ValidationError("display '" + disp.id + "' bound to unknown channel '" + ch + "'");
            }
        }
    }
    const bool first = !bound_;
    bound_ = true;
    if (first) dirty_.push_back("");  // recompute every derived channel once
}

void DataEngine::set_value(const std::string& channel, double time, double value) {
    if (derived_.count(channel)) throw ValidationError("'" + channel + "' is derived and cannot be set");
    mutable_channel(channel).push(time, value);
    dirty_.push_back(channel);
}

DataChannel& DataEngine::mutable_channel(const std::string& name) {
    const auto it = channels_.find(name);
    if (it == channels_.end()) throw ValidationError("unknown channel '" + name + "'");
    return it->second;
}

const DataChannel& DataEngine::channel(const std::string& name) const {
    const auto it = channels_.find(name);
    if (it == channels_.end()) throw ValidationError("unknown channel '" + name + "'");
    return it->second;
}

const Expression& DataEngine::derived_expression(const std::string& name) const {
    const auto it = derived_.find(name);
    if (it == derived_.end()) throw ValidationError("'" + name + "' is not derived");
    return it->second.expr;
}

std::optional<double> DataEngine::lookup(const std::string& name) const {
    if (const auto c = constants_.find(name); c != constants_.end()) return c->second;
    if (const auto ch = channels_.find(name); ch != channels_.end()) return ch->second.value;
    return std::nullopt;
}

void DataEngine::record(const std::string& channel, double time, double value, std::vector<std::string>& changed) {
    auto& ch = mutable_channel(channel);
    if (!ch.history.empty() && ch.history.back().first == time) {
        ch.history.back().second = value;
        ch.value = value;
    } else {
        ch.push(time, value);
    }
    if (std::find(changed.begin(), changed.end(), channel) == changed.end()) changed.push_back(channel);
}

TickResult DataEngine::tick(double now) {
    if (now < now_) throw ValidationError("tick time went backwards");
    if (!bound_) bind();
    const bool advanced = now > now_;
    now_ = now;
    TickResult res;
    res.now = now;
    std::vector<std::string> changed = std::move(dirty_);
    dirty_.clear();
    auto note = [&](const std::string& c) {
        if (std::find(changed.begin(), changed.end(), c) == changed.end()) changed.push_back(c);
    };

    while (!pending_slots_.empty() && pending_slots_.front().start <= now) {
        for (const auto& u : pending_slots_.front().updates) {
            mutable_channel(u.channel).push(u.time, u.value);
            note(u.channel);
        }
        pending_slots_.pop_front();
    }
    if (advanced) {
        for (auto& t : tabular_) {
            if (auto tuple = t.next()) {
                for (std::size_t i = 0; i < tuple->size(); ++i) record(t.columns()[i], now, (*tuple)[i], changed);
            }
        }
    }
    for (auto& s : sensors_) {
        while (s.next < s.replay.size() && s.replay[s.next].timestamp <= now) s.queue->push(s.replay[s.next++]);
        for (auto& p : s.queue->drain()) {
            const auto m = s.map.find(p.sensor_id);
            if (m == s.map.end()) {
                ++sensor_dropped_;
                diagnostics_.push_back({0, "unmapped sensor '" + p.sensor_id + "', point dropped"});
                continue;
            }
            auto& ch = mutable_channel(m->second);
            if (!std::isfinite(p.value) || (!ch.history.empty() && !(p.timestamp > ch.history.back().first))) {
                ++sensor_dropped_;
                diagnostics_.push_back({0, "sensor '" + p.sensor_id + "' point at " + format_number(p.timestamp) +
                                               " rejected (non-increasing time)"});
                continue;
            }
            ch.push(p.timestamp, p.value);
            note(m->second);
        }
    }

    const bool recompute_all = std::find(changed.begin(), changed.end(), "") != changed.end();
    std::erase(changed, std::string());
    std::set<std::string> touched(changed.begin(), changed.end());
    for (const auto& name : order_) {
        const auto& d = derived_.at(name);
        const bool affected = recompute_all || std::any_of(d.inputs.begin(), d.inputs.end(),
                                                             [&](const std::string& i) { return touched.count(i); });
        if (!affected) continue;
        bool ready = true;
        for (const auto& i : d.inputs) ready = ready && lookup(i).has_value();
        if (!ready) continue;
        const double v = d.expr.evaluate([this](const std::string& n) { return lookup(n); });
        record(name, now, v, changed);
        touched.insert(name);
    }

    res.changed = std::move(changed);
    for (const auto& disp : displays_) res.payloads.push_back(payload(disp));
    return res;
}

json DataEngine::payload(const DisplayBinding& d) const {
    json j = display_to_json(d);
    switch (d.kind) {
        case DisplayKind::text:
        case DisplayKind::image: break;
        case DisplayKind::dynamic_text: {
            const auto& ch = channel(d.channel);
            j["unit"] = ch.unit;
            if (ch.value) {
                j["value"] = *ch.value;
                j["display"] = format_number(*ch.value) + (ch.unit.empty() ? "" : " " + ch.unit);
            } else {
                j["value"] = nullptr;
                j["display"] = "";
            }
            break;
        }
        case DisplayKind::graph: {
            json series = json::array();
            for (const auto& name : d.channels) {
                const auto& ch = channel(name);
                json pts = json::array();
                for (const auto& [t, v] : ch.history) pts.push_back({t, v});
                series.push_back({{"channel", name}, {"unit", ch.unit}, {"points", pts}});
            }
            j["series"] = series;
            break;
        }
    }
    return j;
}

}  // namespace dtwin

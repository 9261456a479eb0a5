#pragma once

#include <cstddef>
#include <deque>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dtwin/expression.hpp"
#include "dtwin/json_io.hpp"

namespace dtwin {

struct DataChannel {
    std::string name;
    std::string unit;
    std::optional<double> value;
    std::vector<std::pair<double, double>> history;  // (time, value), strictly increasing time

    /// Throws ValidationError if t is not after the last history time.
    void push(double t, double v);
};

struct ChannelUpdate {
    double time = 0.0;
    std::string channel;
    double value = 0.0;
};

struct Diagnostic {
    int line = 0;  // 0 when not tied to a line
    std::string message;
};

// ---- time series -----------------------------------------------------------

struct TimeSeriesSpec {
    std::filesystem::path path;
    std::string time_column = "time";
    std::vector<std::string> value_columns;  // each feeds the channel of the same name
    double schedule = 1.0;                   // slot width in seconds
};

struct TimeSlot {
    double start = 0.0;  // t0 + index * schedule
    std::vector<ChannelUpdate> updates;
};

struct TimeSeries {
    std::vector<TimeSlot> slots;  // non-empty slots only, ascending
    std::vector<Diagnostic> diagnostics;
    std::size_t update_count() const;
};

/// Row time t goes to slot floor((t - t0) / schedule) where t0 is the first row time.
/// Non-numeric rows are skipped with a diagnostic; an empty file yields no slots and
/// one diagnostic. Non-increasing time throws ValidationError with the line number.
TimeSeries parse_timeseries_csv(const TimeSeriesSpec& spec);
TimeSeries parse_timeseries_csv(std::istream& in, const TimeSeriesSpec& spec);

// ---- tabular ---------------------------------------------------------------

struct TabularSpec {
    std::filesystem::path path;
    std::vector<std::string> columns;
};

/// Buffered table handed out one tuple at a time.
class TabularSource {
public:
    /// Throws ValidationError naming the first selected column missing from the header.
    static TabularSource load(const TabularSpec& spec);
    static TabularSource parse(std::istream& in, const std::vector<std::string>& columns);

    const std::vector<std::string>& columns() const { return columns_; }
    std::size_t size() const { return rows_.size(); }
    std::size_t remaining() const { return rows_.size() - next_; }
    /// Next tuple in file order, nullopt when exhausted.
    std::optional<std::vector<double>> next();
    const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

private:
    std::vector<std::string> columns_;
    std::vector<std::vector<double>> rows_;
    std::size_t next_ = 0;
    std::vector<Diagnostic> diagnostics_;
};

// ---- sensors ---------------------------------------------------------------

struct SensorPoint {
    double timestamp = 0.0;
    std::string sensor_id;
    double value = 0.0;
};

/// Multi-producer queue; the engine drains it on tick.
class SensorQueue {
public:
    void push(SensorPoint p);
    std::vector<SensorPoint> drain();
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::deque<SensorPoint> points_;
};

struct SensorReplay {
    std::vector<SensorPoint> points;
    std::size_t malformed = 0;
    std::vector<Diagnostic> diagnostics;
};

/// Lines `timestamp,sensor_id,value`; '#' comments and blank lines ignored.
SensorReplay read_sensor_replay(const std::filesystem::path& path);
SensorReplay parse_sensor_replay(std::istream& in);

struct SensorStreamSpec {
    std::filesystem::path replay;
    std::map<std::string, std::string> channel_map;  // sensor id -> channel
};

// ---- displays --------------------------------------------------------------

enum class DisplayKind { text, dynamic_text, image, graph };
enum class GraphKind { line, bar };

struct DisplayBinding {
    std::string id;
    DisplayKind kind = DisplayKind::text;
    std::string text;                   // text
    std::string channel;                // dynamic_text
    std::string path;                   // image
    std::vector<std::string> channels;  // graph
    GraphKind graph_kind = GraphKind::line;

    std::vector<std::string> bound_channels() const;
};

const char* display_kind_name(DisplayKind k);
DisplayKind parse_display_kind(const std::string& s);
const char* graph_kind_name(GraphKind k);
GraphKind parse_graph_kind(const std::string& s);

json display_to_json(const DisplayBinding& d);
DisplayBinding display_from_json(const json& j);

// ---- engine ----------------------------------------------------------------

struct TickResult {
    double now = 0.0;
    std::vector<std::string> changed;  // channels updated this tick, in update order
    std::vector<json> payloads;        // one per display, in registration order
};

class DataEngine {
public:
    DataEngine() = default;
    DataEngine(const DataEngine&) = delete;
    DataEngine& operator=(const DataEngine&) = delete;

    DataChannel& add_channel(const std::string& name, const std::string& unit = "");
    void set_constant(const std::string& name, double value);
    void add_derived(const std::string& name, const std::string& expression, const std::string& unit = "");
    void add_timeseries(const TimeSeries& series);
    /// One tuple per tick, released only when the clock advances.
    void add_tabular(TabularSource source);
    /// Registers a stream; points pushed to the returned queue reach channels on the next tick.
    std::shared_ptr<SensorQueue> add_sensor_stream(std::map<std::string, std::string> channel_map);
    /// Recorded points enter the stream's queue in file order once the clock reaches
    /// their timestamp; out-of-order points are then rejected like live ones.
    void add_sensor_replay(const SensorReplay& replay, std::map<std::string, std::string> channel_map);
    void add_display(DisplayBinding display);

    /// Resolves derived-channel identifiers and orders them. Throws ValidationError for
    /// an unknown identifier, a cycle, or a display bound to a missing channel.
    void bind();
    bool bound() const { return bound_; }

    /// Writes an input value directly (manual controls, tests).
    void set_value(const std::string& channel, double time, double value);

    /// Releases due slots and tuples, drains sensor queues, recomputes affected derived
    /// channels, and regenerates display payloads. Binds first if needed.
    TickResult tick(double now);
    double now() const { return now_; }

    bool has_channel(const std::string& name) const { return channels_.count(name) != 0; }
    const DataChannel& channel(const std::string& name) const;
    const std::map<std::string, DataChannel>& channels() const { return channels_; }
    const std::map<std::string, double>& constants() const { return constants_; }
    std::optional<double> lookup(const std::string& name) const;
    const std::vector<std::string>& derived_order() const { return order_; }
    bool is_derived(const std::string& name) const { return derived_.count(name) != 0; }
    const Expression& derived_expression(const std::string& name) const;

    json payload(const DisplayBinding& d) const;
    const std::vector<DisplayBinding>& displays() const { return displays_; }

    std::size_t sensor_dropped() const { return sensor_dropped_; }
    const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

private:
    struct Derived {
        Expression expr;
        std::vector<std::string> inputs;
    };
    struct Sensor {
        std::map<std::string, std::string> map;
        std::shared_ptr<SensorQueue> queue;
        std::vector<SensorPoint> replay;  // file order
        std::size_t next = 0;
    };

    DataChannel& mutable_channel(const std::string& name);
    void record(const std::string& channel, double time, double value, std::vector<std::string>& changed);

    std::map<std::string, DataChannel> channels_;
    std::map<std::string, double> constants_;
    std::map<std::string, Derived> derived_;
    std::vector<std::string> order_;
    std::deque<TimeSlot> pending_slots_;
    std::vector<TabularSource> tabular_;
    std::vector<std::string> dirty_;  // written by set_value since the last tick
    std::vector<Sensor> sensors_;
    std::vector<DisplayBinding> displays_;
    std::vector<Diagnostic> diagnostics_;
    std::size_t sensor_dropped_ = 0;
    double now_ = -std::numeric_limits<double>::infinity();
    bool bound_ = false;
};

}  // namespace dtwin

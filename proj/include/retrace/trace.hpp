#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "retrace/activity_class.hpp"
#include "retrace/error.hpp"

namespace retrace {

using Timestamp = std::int64_t;

/// One (url, user, timestamp) observation.
struct Event {
    std::string url_id;
    std::string user_id;
    Timestamp timestamp = 0;

    friend bool operator==(const Event&, const Event&) = default;
};

struct TraceEvent {
    std::string user_id;
    Timestamp timestamp = 0;

    friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

/// Time-ordered retweet events for one URL. Ties keep input order.
struct Trace {
    std::string url_id;
    std::vector<TraceEvent> events;
    std::optional<ActivityClass> label;

    std::size_t size() const noexcept { return events.size(); }

    friend bool operator==(const Trace&, const Trace&) = default;
};

/// Ordered by url so iteration (and everything written from it) is deterministic.
using TraceMap = std::map<std::string, Trace>;

enum class EventFormat { Jsonl, Csv };

inline std::optional<EventFormat> parse_event_format(std::string_view name) noexcept {
    if (name == "jsonl") return EventFormat::Jsonl;
    if (name == "csv") return EventFormat::Csv;
    return std::nullopt;
}

namespace detail {

inline std::string_view strip_cr(std::string_view line) noexcept {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
}

inline bool is_blank(std::string_view line) noexcept {
    return line.find_first_not_of(" \t") == std::string_view::npos;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline Timestamp parse_timestamp_field(std::string_view text, std::size_t line) {
    if (text.empty()) throw ParseError(line, "empty ts");
    if (text.find_first_of(".eE") != std::string_view::npos) {
        throw ParseError(line, "sub-second or non-integer ts '" + std::string(text) + "'");
    }
    Timestamp value = 0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) {
        throw ParseError(line, "invalid ts '" + std::string(text) + "'");
    }
    if (value < 0) throw ParseError(line, "negative ts");
    return value;
}

inline void check_event(const Event& e, std::size_t line) {
    if (e.url_id.empty()) throw ParseError(line, "empty url_id");
    if (e.user_id.empty()) throw ParseError(line, "empty user_id");
}

inline Event parse_jsonl_record(std::string_view text, std::size_t line) {
    nlohmann::json obj;
    try {
        obj = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(line, std::string("malformed JSON (") + e.what() + ")");
    }
    if (!obj.is_object()) throw ParseError(line, "record is not a JSON object");

    auto string_field = [&](const char* key) -> std::string {
        const auto it = obj.find(key);
        if (it == obj.end()) throw ParseError(line, std::string("missing key '") + key + "'");
        if (!it->is_string()) throw ParseError(line, std::string("key '") + key + "' is not a string");
        return it->get<std::string>();
    };

    Event e;
    e.url_id = string_field("url");
    e.user_id = string_field("user");
    const auto ts = obj.find("ts");
    if (ts == obj.end()) throw ParseError(line, "missing key 'ts'");
    if (ts->is_number_float()) throw ParseError(line, "sub-second or non-integer ts");
    if (ts->is_number_unsigned()) {
        const auto v = ts->get<std::uint64_t>();
        if (v > static_cast<std::uint64_t>(std::numeric_limits<Timestamp>::max())) throw ParseError(line, "ts out of range");
        e.timestamp = static_cast<Timestamp>(v);
    } else if (ts->is_number_integer()) {
        e.timestamp = ts->get<Timestamp>();
        if (e.timestamp < 0) throw ParseError(line, "negative ts");
    } else {
        throw ParseError(line, "key 'ts' is not an integer");
    }
    check_event(e, line);
    return e;
}

inline Event parse_csv_record(std::string_view text, std::size_t line) {
    const auto fields = split(text, ',');
    if (fields.size() != 3) {
        throw ParseError(line, "expected 3 fields, got " + std::to_string(fields.size()));
    }
    Event e{std::string(fields[0]), std::string(fields[1]), 0};
    check_event(e, line);
    e.timestamp = parse_timestamp_field(fields[2], line);
    return e;
}

}  // namespace detail

/// Reads events in file order. Blank lines are skipped. For CSV the `url,user,ts`
/// header is accepted (and skipped) on the first non-blank line but not required.
inline std::vector<Event> parse_events(std::istream& in, EventFormat format) {
    std::vector<Event> events;
    std::string raw;
    std::size_t line = 0;
    bool first_record = true;
    while (std::getline(in, raw)) {
        ++line;
        const auto text = detail::strip_cr(raw);
        if (detail::is_blank(text)) continue;
        if (format == EventFormat::Csv) {
            if (first_record && text == "url,user,ts") {
                first_record = false;
                continue;
            }
            events.push_back(detail::parse_csv_record(text, line));
        } else {
            events.push_back(detail::parse_jsonl_record(text, line));
        }
        first_record = false;
    }
    if (in.bad()) throw Error("I/O error while reading events");
    return events;
}

/// Groups events by url. Each trace is stable-sorted by timestamp.
inline TraceMap build_traces(const std::vector<Event>& events) {
    TraceMap traces;
    for (const Event& e : events) {
        auto [it, inserted] = traces.try_emplace(e.url_id);
        if (inserted) it->second.url_id = e.url_id;
        it->second.events.push_back({e.user_id, e.timestamp});
    }
    for (auto& [url, trace] : traces) {
        std::stable_sort(trace.events.begin(), trace.events.end(),
                         [](const TraceEvent& a, const TraceEvent& b) { return a.timestamp < b.timestamp; });
    }
    return traces;
}

struct PopularityFilter {
    std::size_t min_retweets = 100;
    std::size_t min_popular_urls_per_author = 2;
};

/// Original poster of a url: the explicit map entry if present, else the earliest event's user.
inline const std::string& author_of_trace(const Trace& trace,
                                          const std::unordered_map<std::string, std::string>& author_of) {
    if (const auto it = author_of.find(trace.url_id); it != author_of.end()) return it->second;
    if (trace.events.empty()) throw Error("trace '" + trace.url_id + "' has no events");
    return trace.events.front().user_id;
}

/// Two passes: first keep traces with at least `min_retweets` events (all events
/// count, including the original post), then keep those whose author has at least
/// `min_popular_urls_per_author` popular traces.
inline TraceMap filter_popular(const TraceMap& traces, const PopularityFilter& filter = {},
                               const std::unordered_map<std::string, std::string>& author_of = {}) {
    std::vector<const Trace*> popular;
    std::unordered_map<std::string, std::size_t> popular_per_author;
    for (const auto& [url, trace] : traces) {
        if (trace.size() < filter.min_retweets) continue;
        popular.push_back(&trace);
        ++popular_per_author[author_of_trace(trace, author_of)];
    }
    TraceMap kept;
    for (const Trace* trace : popular) {
        if (popular_per_author[author_of_trace(*trace, author_of)] >= filter.min_popular_urls_per_author) {
            kept.emplace(trace->url_id, *trace);
        }
    }
    return kept;
}

/// Writes one JSONL record per event, traces in map order, events in trace order.
inline void write_events_jsonl(std::ostream& out, const TraceMap& traces) {
    for (const auto& [url, trace] : traces) {
        for (const TraceEvent& e : trace.events) {
            nlohmann::ordered_json rec;
            rec["url"] = trace.url_id;
            rec["user"] = e.user_id;
            rec["ts"] = e.timestamp;
            out << rec.dump() << '\n';
        }
    }
}

inline void write_events_csv(std::ostream& out, const TraceMap& traces) {
    out << "url,user,ts\n";
    for (const auto& [url, trace] : traces) {
        for (const TraceEvent& e : trace.events) out << trace.url_id << ',' << e.user_id << ',' << e.timestamp << '\n';
    }
}

using LabelMap = std::map<std::string, ActivityClass>;

/// Labels CSV: header `url,label`.
inline LabelMap parse_labels(std::istream& in) {
    LabelMap labels;
    std::string raw;
    std::size_t line = 0;
    bool header_seen = false;
    while (std::getline(in, raw)) {
        ++line;
        const auto text = detail::strip_cr(raw);
        if (detail::is_blank(text)) continue;
        if (!header_seen) {
            header_seen = true;
            if (text == "url,label") continue;
        }
        const auto fields = detail::split(text, ',');
        if (fields.size() != 2) throw ParseError(line, "expected 2 fields in label record");
        if (fields[0].empty()) throw ParseError(line, "empty url_id");
        const auto label = parse_activity_class(fields[1]);
        if (!label) throw ParseError(line, "unknown label '" + std::string(fields[1]) + "'");
        if (!labels.emplace(std::string(fields[0]), *label).second) {
            throw ParseError(line, "duplicate label for url '" + std::string(fields[0]) + "'");
        }
    }
    if (in.bad()) throw Error("I/O error while reading labels");
    return labels;
}

inline void write_labels(std::ostream& out, const LabelMap& labels) {
    out << "url,label\n";
    for (const auto& [url, label] : labels) out << url << ',' << to_string(label) << '\n';
}

}  // namespace retrace

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "retrace/error.hpp"
#include "retrace/parallel.hpp"
#include "retrace/trace.hpp"

namespace retrace {

/// Empirical distribution of gaps (whole seconds) between consecutive events.
struct IntervalDistribution {
    std::map<Timestamp, std::size_t> counts;  // observed gaps only
    std::size_t total_intervals = 0;          // K - 1

    double probability(Timestamp gap) const {
        const auto it = counts.find(gap);
        if (it == counts.end() || total_intervals == 0) return 0.0;
        return static_cast<double>(it->second) / static_cast<double>(total_intervals);
    }
};

/// Empirical distribution of which user produced each event.
struct UserDistribution {
    std::map<std::string, std::size_t> counts;
    std::size_t total_events = 0;  // K

    double probability(const std::string& user) const {
        const auto it = counts.find(user);
        if (it == counts.end() || total_events == 0) return 0.0;
        return static_cast<double>(it->second) / static_cast<double>(total_events);
    }
};

/// Classifier input: the two entropies (bits) plus bookkeeping counts.
struct FeatureVector {
    std::string url_id;
    double h_time = 0.0;
    double h_user = 0.0;
    std::size_t n_events = 0;
    std::size_t n_users = 0;
};

/// Shannon entropy in bits of a count histogram. Only positive counts are
/// expected, so 0 log 0 never arises.
template <typename CountMap>
double entropy_bits(const CountMap& counts, std::size_t total) {
    if (total == 0) return 0.0;
    const double n = static_cast<double>(total);
    double h = 0.0;
    for (const auto& [key, count] : counts) {
        if (count == 0) continue;
        const double p = static_cast<double>(count) / n;
        h -= p * std::log2(p);
    }
    // A single-support histogram gives exactly -1*log2(1) = 0; clamp the -0.0.
    return h <= 0.0 ? 0.0 : h;
}

inline IntervalDistribution interval_distribution(const Trace& trace) {
    if (trace.events.size() < 2) throw Error("trace too short for intervals: '" + trace.url_id + "'");
    IntervalDistribution dist;
    for (std::size_t i = 1; i < trace.events.size(); ++i) {
        ++dist.counts[trace.events[i].timestamp - trace.events[i - 1].timestamp];
    }
    dist.total_intervals = trace.events.size() - 1;
    return dist;
}

inline double time_interval_entropy(const IntervalDistribution& dist) {
    return entropy_bits(dist.counts, dist.total_intervals);
}

inline UserDistribution user_distribution(const Trace& trace) {
    UserDistribution dist;
    for (const TraceEvent& e : trace.events) ++dist.counts[e.user_id];
    dist.total_events = trace.events.size();
    return dist;
}

inline double user_entropy(const UserDistribution& dist) { return entropy_bits(dist.counts, dist.total_events); }

inline FeatureVector featurize(const Trace& trace) {
    const auto intervals = interval_distribution(trace);
    const auto users = user_distribution(trace);
    return FeatureVector{trace.url_id, time_interval_entropy(intervals), user_entropy(users), trace.events.size(),
                         users.counts.size()};
}

/// Featurizes every trace in url order.
inline std::vector<FeatureVector> featurize_all(const TraceMap& traces, std::size_t threads = 1) {
    std::vector<const Trace*> order;
    order.reserve(traces.size());
    for (const auto& [url, trace] : traces) order.push_back(&trace);
    std::vector<FeatureVector> out(order.size());
    parallel_for(order.size(), threads, [&](std::size_t i) { out[i] = featurize(*order[i]); });
    return out;
}

inline void write_features_csv(std::ostream& out, const std::vector<FeatureVector>& features) {
    out << "url,h_time,h_user,n_events,n_users\n";
    char buf[64];
    for (const auto& f : features) {
        out << f.url_id << ',';
        std::snprintf(buf, sizeof buf, "%.6f,%.6f", f.h_time, f.h_user);
        out << buf << ',' << f.n_events << ',' << f.n_users << '\n';
    }
}

inline std::vector<FeatureVector> parse_features_csv(std::istream& in) {
    std::vector<FeatureVector> features;
    std::string raw;
    std::size_t line = 0;
    bool header_seen = false;
    while (std::getline(in, raw)) {
        ++line;
        const auto text = detail::strip_cr(raw);
        if (detail::is_blank(text)) continue;
        if (!header_seen) {
            header_seen = true;
            if (text != "url,h_time,h_user,n_events,n_users") {
                throw ParseError(line, "expected feature header 'url,h_time,h_user,n_events,n_users'");
            }
            continue;
        }
        const auto fields = detail::split(text, ',');
        if (fields.size() != 5) throw ParseError(line, "expected 5 fields in feature record");
        if (fields[0].empty()) throw ParseError(line, "empty url_id");
        FeatureVector f;
        f.url_id = std::string(fields[0]);
        try {
            std::size_t used = 0;
            f.h_time = std::stod(std::string(fields[1]), &used);
            f.h_user = std::stod(std::string(fields[2]), &used);
            f.n_events = std::stoull(std::string(fields[3]));
            f.n_users = std::stoull(std::string(fields[4]));
        } catch (const std::exception&) {
            throw ParseError(line, "invalid numeric field in feature record");
        }
        features.push_back(std::move(f));
    }
    if (!header_seen) throw ParseError(line, "missing feature header");
    return features;
}

}  // namespace retrace

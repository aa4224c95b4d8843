#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "retrace/activity_class.hpp"
#include "retrace/error.hpp"
#include "retrace/parallel.hpp"
#include "retrace/trace.hpp"

namespace retrace {

/// Generator parameters for one labelled trace. Zero-valued knobs are drawn
/// from the class defaults using `seed`.
struct GenSpec {
    ActivityClass cls = ActivityClass::NewsAndBlogs;
    std::size_t n_events = 0;            // 0: uniform in [100, 1000]
    std::size_t user_pool = 1'000'000;   // size of the anonymous user id space
    std::uint64_t seed = 0;
    std::string author;                  // first event's user; empty: drawn like any other user
    std::string url_id = "url";
    Timestamp start = 0;                 // 0: 2010-01-01 plus a random offset of up to 180 days

    // NewsAndBlogs: arrival rate halves over this span (seconds).
    Timestamp news_span = 0;             // 0: uniform in [1, 3] days
    // AutoTweet
    Timestamp bot_period = 0;            // 0: uniform in [60, 3600] s
    double jitter_fraction = 0.01;       // share of gaps moved by +-1 s; at most 0.05
    std::optional<bool> collective;      // many distinct accounts instead of one; unset: coin flip
    // Campaign
    std::size_t zealot_count = 0;        // 0: uniform in [2, 5]
    // AdsAndPromotion
    std::size_t burst_min = 3;
    std::size_t burst_max = 12;
    std::size_t ads_users = 0;           // 0: 1 or 2
    // ParasiticAds: share of zero-second gaps, drawn per trace.
    double parasitic_zero_min = 0.0;
    double parasitic_zero_max = 0.7;
};

namespace detail {

inline constexpr Timestamp kDay = 86'400;
inline constexpr Timestamp kEpoch2010 = 1'262'304'000;

/// Integer gap with log-uniform magnitude over [lo, hi] seconds.
inline Timestamp log_uniform_gap(std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
    return static_cast<Timestamp>(std::floor(std::exp(u(rng))));
}

class UserSampler {
public:
    UserSampler(std::size_t pool, std::mt19937_64& rng) : pool_(pool), rng_(rng) {}

    std::string any() { return name(std::uniform_int_distribution<std::size_t>(0, pool_ - 1)(rng_)); }

    /// Fresh id never returned before by this sampler.
    std::string distinct() {
        if (used_.size() >= pool_) throw Error("user pool exhausted");
        while (true) {
            const auto id = std::uniform_int_distribution<std::size_t>(0, pool_ - 1)(rng_);
            if (used_.insert(id).second) return name(id);
        }
    }

private:
    static std::string name(std::size_t id) { return "u" + std::to_string(id); }

    std::size_t pool_;
    std::mt19937_64& rng_;
    std::unordered_set<std::size_t> used_;
};

}  // namespace detail

inline void validate(const GenSpec& spec) {
    if (spec.n_events != 0 && spec.n_events < 100) throw Error("GenSpec n_events must be >= 100");
    if (spec.user_pool < 1) throw Error("GenSpec user_pool must be >= 1");
    if (spec.jitter_fraction < 0.0 || spec.jitter_fraction > 0.05) throw Error("jitter_fraction must be in [0, 0.05]");
    if (spec.bot_period < 0) throw Error("bot period must be >= 1 second");
    if (spec.news_span < 0) throw Error("news span must be positive");
    if (spec.zealot_count != 0 && spec.user_pool < spec.zealot_count) {
        throw Error("user_pool (" + std::to_string(spec.user_pool) + ") smaller than zealot_count (" +
                    std::to_string(spec.zealot_count) + ")");
    }
    if (spec.burst_min < 1 || spec.burst_max < spec.burst_min) throw Error("invalid burst size range");
    if (spec.ads_users > 2) throw Error("ads_users must be 1 or 2");
    if (!(spec.parasitic_zero_min >= 0.0 && spec.parasitic_zero_min <= spec.parasitic_zero_max &&
          spec.parasitic_zero_max < 1.0)) {
        throw Error("invalid parasitic zero-gap share range");
    }
}

/// Generates one labelled trace shaped like its activity class.
inline Trace gen_trace(const GenSpec& spec) {
    validate(spec);
    std::mt19937_64 rng(spec.seed);
    const std::size_t n = spec.n_events ? spec.n_events : std::uniform_int_distribution<std::size_t>(100, 1000)(rng);
    const Timestamp start =
        spec.start ? spec.start : detail::kEpoch2010 + std::uniform_int_distribution<Timestamp>(0, 180 * detail::kDay)(rng);

    detail::UserSampler users(spec.user_pool, rng);
    std::vector<std::string> who;
    std::vector<Timestamp> gaps;  // n - 1 gaps
    who.reserve(n);
    gaps.reserve(n - 1);
    const auto first_user = [&](detail::UserSampler& s) { return spec.author.empty() ? s.distinct() : spec.author; };

    switch (spec.cls) {
        case ActivityClass::NewsAndBlogs: {
            if (spec.user_pool < n) throw Error("news trace needs user_pool >= n_events for distinct users");
            // Arrival density proportional to 2^(-t/span): fast rise, slow saturation.
            const double span = static_cast<double>(
                spec.news_span ? spec.news_span : std::uniform_int_distribution<Timestamp>(detail::kDay, 3 * detail::kDay)(rng));
            const double rate = std::log(2.0) / span;
            const double mass = 1.0 - std::exp(-rate * span);
            std::uniform_real_distribution<double> u(0.0, 1.0);
            std::vector<Timestamp> t(n - 1);
            for (auto& v : t) v = static_cast<Timestamp>(std::floor(-std::log(1.0 - u(rng) * mass) / rate));
            std::sort(t.begin(), t.end());
            Timestamp prev = 0;
            for (Timestamp v : t) {
                gaps.push_back(v - prev);
                prev = v;
            }
            who.push_back(first_user(users));
            while (who.size() < n) who.push_back(users.distinct());
            break;
        }
        case ActivityClass::AutoTweet: {
            const Timestamp period =
                spec.bot_period ? spec.bot_period : std::uniform_int_distribution<Timestamp>(60, 3600)(rng);
            if (period < 1) throw Error("bot period must be >= 1 second");
            gaps.assign(n - 1, period);
            const auto jittered = static_cast<std::size_t>(std::floor(spec.jitter_fraction * static_cast<double>(n - 1)));
            std::vector<std::size_t> idx(n - 1);
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            std::shuffle(idx.begin(), idx.end(), rng);
            std::bernoulli_distribution sign(0.5);
            for (std::size_t i = 0; i < jittered; ++i) gaps[idx[i]] += (sign(rng) || period == 1) ? 1 : -1;
            const bool collective = spec.collective ? *spec.collective : std::bernoulli_distribution(0.5)(rng);
            who.push_back(first_user(users));
            if (collective && spec.user_pool < n) throw Error("collective auto-tweet needs user_pool >= n_events");
            while (who.size() < n) who.push_back(collective ? users.distinct() : who.front());
            break;
        }
        case ActivityClass::Campaign: {
            const std::size_t z = spec.zealot_count ? spec.zealot_count : std::uniform_int_distribution<std::size_t>(2, 5)(rng);
            if (spec.user_pool < z) throw Error("user_pool smaller than zealot_count");
            std::vector<std::string> zealots{first_user(users)};
            while (zealots.size() < z) zealots.push_back(users.distinct());
            std::uniform_int_distribution<std::size_t> pick(0, z - 1);
            who.push_back(zealots.front());
            while (who.size() < n) who.push_back(zealots[pick(rng)]);
            for (std::size_t i = 0; i + 1 < n; ++i) gaps.push_back(detail::log_uniform_gap(rng, 1.0, 86'400.0));
            break;
        }
        case ActivityClass::AdsAndPromotion: {
            const std::size_t k = spec.ads_users ? spec.ads_users : std::uniform_int_distribution<std::size_t>(1, 2)(rng);
            if (spec.user_pool < k) throw Error("user_pool smaller than ads_users");
            const std::string owner = first_user(users);
            const std::string helper = k > 1 ? users.distinct() : owner;
            const double helper_share = std::uniform_real_distribution<double>(0.1, 0.5)(rng);
            std::bernoulli_distribution by_helper(helper_share);
            who.push_back(owner);
            while (who.size() < n) who.push_back(by_helper(rng) ? helper : owner);
            const std::size_t burst = std::uniform_int_distribution<std::size_t>(spec.burst_min, spec.burst_max)(rng);
            for (std::size_t i = 1; i < n; ++i) {
                gaps.push_back(i % burst == 0 ? detail::log_uniform_gap(rng, 600.0, 86'400.0) : 0);
            }
            break;
        }
        case ActivityClass::ParasiticAds: {
            if (spec.user_pool < n) throw Error("parasitic trace needs user_pool >= n_events for distinct users");
            const double zero_share =
                std::uniform_real_distribution<double>(spec.parasitic_zero_min, spec.parasitic_zero_max)(rng);
            std::bernoulli_distribution zero(zero_share);
            for (std::size_t i = 0; i + 1 < n; ++i) {
                gaps.push_back(zero(rng) ? 0 : detail::log_uniform_gap(rng, 1.0, 86'400.0));
            }
            who.push_back(first_user(users));
            while (who.size() < n) who.push_back(users.distinct());
            break;
        }
    }

    Trace trace;
    trace.url_id = spec.url_id;
    trace.label = spec.cls;
    trace.events.reserve(n);
    Timestamp t = start;
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) t += gaps[i - 1];
        trace.events.push_back({who[i], t});
    }
    return trace;
}

struct SyntheticCorpus {
    TraceMap traces;  // labelled
    LabelMap labels;
};

/// `per_class` traces of every class. Url ids are shuffled so they carry no class
/// information; authors come in pairs within a class so each author owns at least
/// two popular urls.
inline SyntheticCorpus gen_corpus(std::size_t per_class, std::uint64_t seed, std::size_t threads = 1) {
    if (per_class < 1) throw Error("per_class must be >= 1");
    const std::size_t total = per_class * kNumClasses;
    std::vector<std::size_t> url_numbers(total);
    std::iota(url_numbers.begin(), url_numbers.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(seed, 0xC0FFEE));
    std::shuffle(url_numbers.begin(), url_numbers.end(), rng);

    const std::size_t pairs_per_class = std::max<std::size_t>(1, per_class / 2);
    std::vector<Trace> generated(total);
    parallel_for(total, threads, [&](std::size_t g) {
        const std::size_t c = g / per_class;
        const std::size_t i = g % per_class;
        char buf[32];
        GenSpec spec;
        spec.cls = class_from_index(c);
        spec.seed = derive_seed(seed, g);
        std::snprintf(buf, sizeof buf, "url%05zu", url_numbers[g]);
        spec.url_id = buf;
        std::snprintf(buf, sizeof buf, "author%05zu", c * pairs_per_class + std::min(i / 2, pairs_per_class - 1));
        spec.author = buf;
        generated[g] = gen_trace(spec);
    });

    SyntheticCorpus corpus;
    for (auto& t : generated) {
        corpus.labels.emplace(t.url_id, *t.label);
        corpus.traces.emplace(t.url_id, std::move(t));
    }
    return corpus;
}

}  // namespace retrace

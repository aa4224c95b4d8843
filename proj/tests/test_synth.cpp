#include <cmath>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "retrace/entropy.hpp"
#include "retrace/synth.hpp"

using namespace retrace;

namespace {

Trace make(ActivityClass c, std::uint64_t seed, std::size_t n = 0) {
    GenSpec s;
    s.cls = c;
    s.seed = seed;
    s.n_events = n;
    return gen_trace(s);
}

}  // namespace

TEST(GenTrace, FixedPeriodBotHasZeroTimeEntropy) {
    GenSpec s;
    s.cls = ActivityClass::AutoTweet;
    s.bot_period = 604;
    s.jitter_fraction = 0.0;
    s.seed = 3;
    const auto t = gen_trace(s);
    for (std::size_t i = 1; i < t.events.size(); ++i) {
        ASSERT_EQ(t.events[i].timestamp - t.events[i - 1].timestamp, 604);
    }
    EXPECT_EQ(featurize(t).h_time, 0.0);
}

TEST(GenTrace, NewsUsersAreAllDistinct) {
    for (std::size_t k : {100u, 357u, 1000u}) {
        const auto t = make(ActivityClass::NewsAndBlogs, k, k);
        EXPECT_EQ(t.size(), k);
        EXPECT_NEAR(featurize(t).h_user, std::log2(double(k)), 1e-12);
    }
}

TEST(GenTrace, CampaignSupportIsZealotCount) {
    GenSpec s;
    s.cls = ActivityClass::Campaign;
    s.zealot_count = 3;
    s.n_events = 3000;
    s.seed = 11;
    EXPECT_EQ(user_distribution(gen_trace(s)).counts.size(), 3u);
}

TEST(GenTrace, ContradictorySpecsAreErrors) {
    GenSpec s;
    s.cls = ActivityClass::Campaign;
    s.zealot_count = 5;
    s.user_pool = 4;
    EXPECT_THROW(gen_trace(s), Error);
    s.user_pool = 1'000'000;
    s.zealot_count = 2;
    EXPECT_NO_THROW(gen_trace(s));

    GenSpec few;
    few.n_events = 50;
    EXPECT_THROW(gen_trace(few), Error);
    GenSpec bot;
    bot.cls = ActivityClass::AutoTweet;
    bot.jitter_fraction = 0.2;
    EXPECT_THROW(gen_trace(bot), Error);
    GenSpec pool;
    pool.user_pool = 0;
    EXPECT_THROW(gen_trace(pool), Error);
}

TEST(GenTrace, ClassGeometryHoldsAcrossSeeds) {
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        const auto bot = featurize(make(ActivityClass::AutoTweet, seed));
        EXPECT_LT(bot.h_time, 0.2) << "seed " << seed;

        const auto news_trace = make(ActivityClass::NewsAndBlogs, seed);
        const auto news = featurize(news_trace);
        EXPECT_NEAR(news.h_user, std::log2(double(news_trace.size())), 0.1);

        GenSpec c;
        c.cls = ActivityClass::Campaign;
        c.seed = seed;
        c.zealot_count = 2 + seed % 4;
        const auto camp = featurize(gen_trace(c));
        EXPECT_LE(camp.h_user, std::log2(double(c.zealot_count)) + 1e-12);
        EXPECT_GT(camp.h_time, 5.0);

        const auto ads = featurize(make(ActivityClass::AdsAndPromotion, seed));
        EXPECT_LE(ads.n_users, 2u);
        EXPECT_LE(ads.h_user, 1.0 + 1e-12);

        const auto para = featurize(make(ActivityClass::ParasiticAds, seed));
        EXPECT_EQ(para.n_users, para.n_events);
    }
}

TEST(GenTrace, EventsSortedAndSized) {
    for (auto c : kAllClasses) {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const auto t = make(c, seed);
            EXPECT_GE(t.size(), 100u);
            EXPECT_LE(t.size(), 1000u);
            EXPECT_EQ(t.label, c);
            for (std::size_t i = 1; i < t.size(); ++i) EXPECT_LE(t.events[i - 1].timestamp, t.events[i].timestamp);
        }
    }
}

TEST(GenTrace, SameSpecSameTrace) {
    for (auto c : kAllClasses) EXPECT_EQ(make(c, 99), make(c, 99));
}

TEST(GenCorpus, CountsPerLabel) {
    const auto corpus = gen_corpus(100, 7, 4);
    EXPECT_EQ(corpus.traces.size(), 500u);
    std::array<std::size_t, kNumClasses> per{};
    for (const auto& [url, label] : corpus.labels) ++per[class_index(label)];
    for (auto n : per) EXPECT_EQ(n, 100u);
    // Every generated trace survives the default popularity filter.
    EXPECT_EQ(filter_popular(corpus.traces).size(), 500u);
}

TEST(GenCorpus, DeterministicFilesAcrossThreadCounts) {
    const auto a = gen_corpus(10, 5, 1);
    const auto b = gen_corpus(10, 5, 8);
    std::ostringstream ea, eb, la, lb;
    write_events_jsonl(ea, a.traces);
    write_events_jsonl(eb, b.traces);
    write_labels(la, a.labels);
    write_labels(lb, b.labels);
    EXPECT_EQ(ea.str(), eb.str());
    EXPECT_EQ(la.str(), lb.str());
    std::ostringstream ec;
    write_events_jsonl(ec, gen_corpus(10, 6).traces);
    EXPECT_NE(ea.str(), ec.str());
}

TEST(GenCorpus, RoundTripPreservesTracesAndFeatures) {
    const auto corpus = gen_corpus(8, 13);
    for (const auto format : {EventFormat::Jsonl, EventFormat::Csv}) {
        std::stringstream buf;
        if (format == EventFormat::Jsonl) write_events_jsonl(buf, corpus.traces);
        else write_events_csv(buf, corpus.traces);
        const auto back = build_traces(parse_events(buf, format));
        ASSERT_EQ(back.size(), corpus.traces.size());
        for (const auto& [url, t] : corpus.traces) {
            const auto& r = back.at(url);
            EXPECT_EQ(r.events, t.events) << url;
            const auto fa = featurize(t), fb = featurize(r);
            EXPECT_EQ(fa.h_time, fb.h_time);
            EXPECT_EQ(fa.h_user, fb.h_user);
        }
    }
    std::stringstream labels;
    write_labels(labels, corpus.labels);
    EXPECT_EQ(parse_labels(labels), corpus.labels);
}

TEST(GenCorpus, UrlIdsCarryNoClassOrder) {
    const auto corpus = gen_corpus(20, 2);
    std::set<ActivityClass> first_ten;
    std::size_t i = 0;
    for (const auto& [url, label] : corpus.labels) {
        if (i++ >= 10) break;
        first_ten.insert(label);
    }
    EXPECT_GT(first_ten.size(), 1u);
}

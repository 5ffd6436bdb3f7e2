// SPDX-License-Identifier: Apache-2.0
#include "agentflow/error.hpp"
#include "agentflow/memory.hpp"
#include "oracles.hpp"
#include "topology_fixtures.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>
#include <thread>

using namespace agentflow;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> contents(const ShortMemory& m) {
    std::vector<std::string> out;
    for (const auto& msg : m.messages()) out.push_back(msg.content);
    return out;
}

// Scope filter written out independently of EpisodeScope::admits.
bool oracle_admits(const Episode& e, const QueryContext& ctx, bool same, bool indirect, bool successful) {
    const bool same_wf = e.workflow_id == ctx.workflow_id;
    bool is_direct = false;
    for (const auto& d : ctx.direct_dependencies) is_direct = is_direct || d == e.task_id;
    if (same && !same_wf) return false;
    if (indirect && same_wf && (is_direct || e.task_id == ctx.task_id)) return false;
    if (successful && !e.success) return false;
    return true;
}

} // namespace

TEST_CASE("short memory keeps the pinned prefix and the newest messages") {
    ShortMemory m(4);
    m.append(Message::system("sys"));
    m.append(Message::user("instruction"));
    for (int i = 0; i < 5; ++i) {
        m.append(Message::assistant("a" + std::to_string(i)));
        m.append(Message::user("o" + std::to_string(i)));
    }
    CHECK(contents(m) == std::vector<std::string>{"sys", "instruction", "a4", "o4"});
    CHECK_THROWS_AS(ShortMemory(1, 2), Error);
    CHECK_THROWS_AS(ShortMemory(0), Error);

    ShortMemory unbounded;
    for (int i = 0; i < 50; ++i) unbounded.append(Message::user("m" + std::to_string(i)));
    CHECK(unbounded.size() == 50);
}

TEST_CASE("purged short memory refuses access") {
    ShortMemory m;
    m.append(Message::system("s"));
    m.purge();
    CHECK(m.purged());
    try {
        m.messages();
        FAIL("expected MemoryPurged");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::MemoryPurged);
    }
    CHECK_THROWS_AS(m.append(Message::user("x")), Error);
}

TEST_CASE("episode scope, every flag combination, against brute force") {
    std::mt19937 rng(5);
    HashingEmbedder embedder;
    EpisodicStore store;
    const std::vector<std::string> workflows{"wf-a", "wf-b", "wf-c"};
    for (int i = 0; i < 60; ++i) {
        Episode e;
        e.workflow_id = workflows[rng() % 3];
        e.task_id = "t" + std::to_string(rng() % 6);
        e.description = fixtures::random_words(rng, 3);
        e.result = fixtures::random_words(rng, 5);
        e.success = rng() % 4 != 0;
        e.embed_with(embedder);
        store.store(e);
    }
    const QueryContext ctx{"wf-a", "t5", {"t1", "t2"}};
    const auto all = store.episodes();
    for (int mask = 0; mask < 8; ++mask) {
        EpisodeScope scope{(mask & 1) != 0, (mask & 2) != 0, (mask & 4) != 0, {}};
        for (int q = 0; q < 5; ++q) {
            const std::string text = fixtures::random_words(rng, 3);
            const auto qv = oracle::embed(text);
            std::vector<std::pair<double, std::size_t>> want;
            for (std::size_t i = 0; i < all.size(); ++i) {
                if (!oracle_admits(all[i], ctx, scope.same_workflow_only, scope.indirect_only, scope.successful_only))
                    continue;
                double s = std::max(oracle::cosine(qv, oracle::embed(all[i].description)),
                                    oracle::cosine(qv, oracle::embed(all[i].result)));
                want.push_back({s, i});
            }
            std::stable_sort(want.begin(), want.end(), [](auto& a, auto& b) { return a.first > b.first; });
            if (want.size() > 4) want.resize(4);
            auto got = store.query(embedder.embed(text), scope, ctx, 4);
            REQUIRE(got.size() == want.size());
            for (std::size_t i = 0; i < got.size(); ++i) {
                CHECK(got[i].episode.episode_id == all[want[i].second].episode_id);
                CHECK(got[i].score == doctest::Approx(want[i].first).epsilon(1e-12));
            }
        }
    }
    EpisodeScope custom;
    custom.predicates.push_back([](const Episode& e) { return e.task_id == "t0"; });
    for (const auto& r : store.query(embedder.embed("x"), custom, ctx, 100)) CHECK(r.episode.task_id == "t0");
    CHECK_THROWS_AS(store.query(embedder.embed("x"), custom, ctx, 0), Error);
}

TEST_CASE("episodic store persists and reopens") {
    auto path = fs::temp_directory_path() / ("agentflow-episodes-" + std::to_string(::getpid())) / "store.jsonl";
    fs::remove_all(path.parent_path());
    HashingEmbedder embedder;
    std::vector<Episode> written;
    {
        EpisodicStore store(path.string());
        for (int i = 0; i < 3; ++i) {
            Episode e;
            e.workflow_id = "wf";
            e.task_id = "t" + std::to_string(i);
            e.description = "describe " + std::to_string(i) + " battery range";
            e.result = "result 0." + std::to_string(i * 7);
            e.dependency_ids = {"x"};
            e.embed_with(embedder);
            CHECK(store.store(e) == "ep-00000" + std::to_string(i + 1));
        }
        written = store.episodes();
    }
    EpisodicStore reopened(path.string());
    REQUIRE(reopened.size() == 3);
    auto back = reopened.episodes();
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].episode_id == written[i].episode_id);
        CHECK(back[i].dependency_ids == written[i].dependency_ids);
        for (std::size_t k = 0; k < back[i].description_vector.values.size(); ++k)
            CHECK(back[i].description_vector.values[k] ==
                  doctest::Approx(written[i].description_vector.values[k]).epsilon(1e-12));
    }
    Episode e;
    e.workflow_id = "wf";
    CHECK(reopened.store(e) == "ep-000004");
    e.episode_id = "ep-000004";
    CHECK_THROWS_AS(reopened.store(e), Error);
    reopened.seed(written);
    CHECK(reopened.size() == 4);
    CHECK(reopened.episodes_for("wf").size() == 4);
    fs::remove_all(path.parent_path());
}

TEST_CASE("episodic store under concurrent appends and queries") {
    EpisodicStore store;
    HashingEmbedder embedder;
    std::vector<std::thread> writers;
    for (int t = 0; t < 4; ++t) {
        writers.emplace_back([&, t] {
            for (int i = 0; i < 50; ++i) {
                Episode e;
                e.workflow_id = "wf" + std::to_string(t);
                e.description = "job " + std::to_string(i);
                e.embed_with(embedder);
                store.store(e);
                store.query(embedder.embed("job"), EpisodeScope{}, QueryContext{}, 3);
            }
        });
    }
    for (auto& w : writers) w.join();
    auto all = store.episodes();
    CHECK(all.size() == 200);
    std::set<std::string> ids;
    for (const auto& e : all) ids.insert(e.episode_id);
    CHECK(ids.size() == 200);
}

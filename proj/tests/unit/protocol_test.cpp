#include "protip/error.hpp"
#include "protip/protocol.hpp"
#include "protip/remote_oracle.hpp"
#include "protip/simgen.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <sstream>
#include <thread>

using namespace protip;
using namespace protip::protocol;
using nlohmann::json;

namespace {

simgen::SimOracleConfig sim_cfg() {
    simgen::SimOracleConfig c;
    c.seed = 42;
    c.ae_fraction = 0.5;
    c.embed_noise = 0.3;
    return c;
}

std::string serve_command() {
    return testsupport::cli() + " serve --scenario '" + sim_cfg().to_json() + "'";
}

void expect_unavailable(const std::function<void()>& f) {
    try {
        f();
        FAIL() << "expected OracleUnavailable";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::OracleUnavailable) << e.what();
    }
}

}  // namespace

TEST(Protocol, RequestRoundTrip) {
    OracleRequest r{7, "score", "", "a daog", "a dog", 12, 99};
    const auto line = encode(r);
    EXPECT_EQ(line.find('\n'), std::string::npos);
    const auto back = decode_request(line);
    EXPECT_EQ(back.id, 7);
    EXPECT_EQ(back.op, "score");
    EXPECT_EQ(back.prompt, "a daog");
    EXPECT_EQ(back.caption, "a dog");
    EXPECT_EQ(back.count, 12);
    EXPECT_EQ(back.seed, 99u);
    EXPECT_THROW(decode_request("{\"op\":\"embed\"}"), Error);
    EXPECT_THROW(decode_request("not json"), Error);
}

TEST(Protocol, ResponseRoundTrip) {
    OracleResponse r;
    r.id = 4;
    r.ok = true;
    r.scores = {31.5, 29.25};
    const auto back = decode_response(encode(r));
    ASSERT_TRUE(back.id.has_value());
    EXPECT_EQ(*back.id, 4);
    EXPECT_TRUE(back.ok);
    EXPECT_EQ(back.scores, r.scores);
}

TEST(Protocol, HandleLineShapes) {
    simgen::SimOracle oracle(sim_cfg());
    auto embed = json::parse(handle_line(oracle, R"({"id":1,"op":"embed","text":"a dog"})"));
    EXPECT_EQ(embed["id"], 1);
    EXPECT_TRUE(embed["ok"].get<bool>());
    EXPECT_EQ(embed["embedding"].size(), sim_cfg().embed_dim);

    auto score = json::parse(
        handle_line(oracle, R"({"id":2,"op":"score","prompt":"a daog","caption":"a dog","count":12,"seed":7})"));
    EXPECT_EQ(score["id"], 2);
    ASSERT_EQ(score["scores"].size(), 12u);
    for (double s : score["scores"]) {
        EXPECT_GE(s, 0.0);
        EXPECT_LE(s, 100.0);
    }

    auto nope = json::parse(handle_line(oracle, R"({"id":3,"op":"nope"})"));
    EXPECT_EQ(nope, json::parse(R"({"id":3,"ok":false,"error":"unsupported_op"})"));

    auto bad = json::parse(handle_line(oracle, "{{{"));
    EXPECT_TRUE(bad["id"].is_null());
    EXPECT_EQ(bad["error"], "parse");
    auto bad_with_id = json::parse(handle_line(oracle, R"({"id":5,"op":7})"));
    EXPECT_EQ(bad_with_id["id"], 5);
    EXPECT_EQ(bad_with_id["error"], "parse");

    auto zero = json::parse(handle_line(oracle, R"({"id":6,"op":"score","prompt":"a","caption":"a","count":0})"));
    EXPECT_FALSE(zero["ok"].get<bool>());
}

TEST(Protocol, ServeAnswersEveryLineInOrder) {
    simgen::SimOracle oracle(sim_cfg());
    std::istringstream in(
        "{\"id\":1,\"op\":\"embed\",\"text\":\"x\"}\nbroken\n{\"id\":3,\"op\":\"score\",\"prompt\":\"p\",\"caption\":\"c\","
        "\"count\":3,\"seed\":1}\n");
    std::ostringstream out;
    serve(oracle, in, out);
    std::istringstream lines(out.str());
    std::string line;
    std::vector<json> replies;
    while (std::getline(lines, line)) replies.push_back(json::parse(line));
    ASSERT_EQ(replies.size(), 3u);
    EXPECT_EQ(replies[0]["id"], 1);
    EXPECT_TRUE(replies[1]["id"].is_null());
    EXPECT_EQ(replies[2]["id"], 3);
}

TEST(RemoteOracle, SubprocessMatchesInProcessOracle) {
    RemoteOracle remote(std::make_unique<SubprocessTransport>(serve_command()));
    simgen::SimOracle local(sim_cfg());
    const ScoreRequest req{"A white daog", "A white dog", 12, 5};
    EXPECT_EQ(remote.score(req), local.score(req));
    const auto e1 = remote.embed("A white daog"), e2 = local.embed("A white daog");
    EXPECT_NEAR(semgate::cosine(e1, e2), 1.0, 1e-12);
    // A second request on the same channel still lines up.
    EXPECT_EQ(remote.score({"x y", "x z", 3, 1}), local.score({"x y", "x z", 3, 1}));
}

TEST(RemoteOracle, DeadChildIsUnavailable) {
    RemoteOracle remote(std::make_unique<SubprocessTransport>("false"));
    expect_unavailable([&] { remote.score({"a", "b", 2, 1}); });
}

TEST(RemoteOracle, ProtocolViolationsAreUnavailable) {
    {
        RemoteOracle r(std::make_unique<SubprocessTransport>(
            R"(read l; echo '{"id":99,"ok":true,"scores":[1,2]}'; sleep 1)"));
        expect_unavailable([&] { r.score({"a", "b", 2, 1}); });
    }
    {
        RemoteOracle r(std::make_unique<SubprocessTransport>(
            R"(read l; echo '{"id":1,"ok":true,"scores":[1,200]}'; sleep 1)"));
        expect_unavailable([&] { r.score({"a", "b", 2, 1}); });
    }
    {
        RemoteOracle r(std::make_unique<SubprocessTransport>(R"(read l; echo '{"id":1,"ok":true,"scores":[1]}'; sleep 1)"));
        expect_unavailable([&] { r.score({"a", "b", 2, 1}); });
    }
    {
        RemoteOracle r(std::make_unique<SubprocessTransport>(R"(read l; echo '{"id":1,"ok":false,"error":"oom"}')"));
        expect_unavailable([&] { r.score({"a", "b", 2, 1}); });
    }
    {
        RemoteOracle r(std::make_unique<SubprocessTransport>(R"(read l; echo 'garbage')"));
        expect_unavailable([&] { r.embed("a"); });
    }
}

TEST(RemoteOracle, Tcp) {
    simgen::SimOracle served(sim_cfg());
    TcpOracleServer server(served, 0);
    ASSERT_GT(server.port(), 0);
    std::thread t([&] { server.serve_one(); });
    {
        RemoteOracle remote(std::make_unique<TcpTransport>("127.0.0.1:" + std::to_string(server.port())));
        simgen::SimOracle local(sim_cfg());
        const ScoreRequest req{"A white daog", "A white dog", 8, 3};
        EXPECT_EQ(remote.score(req), local.score(req));
        EXPECT_EQ(remote.embed("hello").dim(), sim_cfg().embed_dim);
    }
    t.join();
}

TEST(RemoteOracle, TcpConnectFailure) {
    expect_unavailable([] { TcpTransport t("127.0.0.1:1"); });
    EXPECT_THROW(TcpTransport("no-port"), Error);
}

TEST(FileOracle, ServesConsecutiveScores) {
    auto o = FileOracle::parse(R"({"texts":{"a dog":[1,0],"a daog":[0.9,0.1]},"scores":{"a daog":[30,31,32],"a dog":[33]}})");
    EXPECT_EQ(o->score({"a daog", "a dog", 2, 0}), (std::vector<double>{30, 31}));
    EXPECT_EQ(o->score({"a daog", "a dog", 1, 0}), (std::vector<double>{32}));
    expect_unavailable([&] { o->score({"a daog", "a dog", 1, 0}); });
    expect_unavailable([&] { o->score({"a cat", "a dog", 1, 0}); });
    expect_unavailable([&] { o->embed("unknown"); });
    EXPECT_EQ(o->embed("a dog").dim(), 2u);
    EXPECT_THROW(FileOracle::parse("[1,2]"), Error);
}

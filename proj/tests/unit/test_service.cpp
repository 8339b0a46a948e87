#include <doctest.h>

#include <chrono>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "field_fixture.hpp"
#include "helpers.hpp"
#include "sonofield/error.hpp"
#include "sonofield/service.hpp"

// After Eigen: resolv.h defines _res.
#include <httplib.h>

using namespace sonofield;
using nlohmann::json;

namespace {

ServiceState two_models() {
    ServiceState s;
    s.add("cup", fixture_field(2, 1));
    s.add("ball", fixture_field(1, 2, 4.0, 600.0));
    return s;
}

NeuralTransferField default_architecture() {
    FieldMeta meta;
    meta.labels = {"a", "b"};
    meta.r_min = 1;
    meta.r_max = 2;
    meta.f_min = 10;
    meta.f_max = 8000;
    meta.steps_trained = 1;
    return {EncodingConfig{}, MlpShape{}, meta, init_params(EncodingConfig{}, MlpShape{}, 2, 3)};
}

// Runs serve() on a free port for the lifetime of the object.
struct LiveServer {
    std::thread thread;
    std::mutex mu;
    std::condition_variable cv;
    int port = 0;
    std::function<void()> stop;

    LiveServer(const ServiceState& state, std::optional<std::filesystem::path> ui) {
        ServeOptions o;
        o.port = 0;
        o.ui_dir = std::move(ui);
        o.on_ready = [this](int p, std::function<void()> s) {
            std::lock_guard lock(mu);
            port = p;
            stop = std::move(s);
            cv.notify_all();
        };
        thread = std::thread([&state, o] { serve(state, o); });
        std::unique_lock lock(mu);
        cv.wait(lock, [this] { return port != 0; });
    }
    ~LiveServer() {
        stop();
        thread.join();
    }
};

}  // namespace

TEST_SUITE("service") {

TEST_CASE("meta lists every model") {
    const ServiceState s = two_models();
    const HttpResult r = handle_meta(s);
    CHECK(r.status == 200);
    const json j = json::parse(r.body);
    REQUIRE(j["models"].size() == 2);
    const json& ball = j["models"][0];
    CHECK(ball["id"] == "ball");
    CHECK(ball["labels"].size() == 1);
    CHECK(ball["f_range"][1] == 600.0);
    CHECK(ball["r_range"][0] == 1.0);
    CHECK(ball["outputs"] == 1);
    CHECK(ball["provenance"] == "fixture");
    CHECK(j["models"][1]["condition_ranges"].size() == 2);
}

TEST_CASE("query: single point and arrays") {
    const ServiceState s = two_models();
    const NeuralTransferField& f = *s.find("cup");
    const json one{{"model", "cup"}, {"theta", 0.3}, {"phi", 1.0}, {"r", 1.5}, {"v", {0.2, 0.4}}, {"f", 500}};
    HttpResult r = handle_query(s, one.dump());
    REQUIRE(r.status == 200);
    json j = json::parse(r.body);
    CHECK(j["count"] == 1);
    CHECK(j["p"][0].get<double>() == f.forward(0.3, 1.0, 1.5, std::vector<double>{0.2, 0.4}, 500)[0]);

    const json many{{"model", "cup"},
                    {"theta", {0.1, -2.0}},
                    {"phi", {0.5, 2.5}},
                    {"r", {1.1, 1.9}},
                    {"v", {{0.0, 1.0}, {0.5, 0.5}}},
                    {"f", {20, 7000}}};
    r = handle_query(s, many.dump());
    REQUIRE(r.status == 200);
    j = json::parse(r.body);
    CHECK(j["count"] == 2);
    CHECK(j["p"][1].get<double>() == f.forward(-2.0, 2.5, 1.9, std::vector<double>{0.5, 0.5}, 7000)[0]);

    json shared = many;
    shared["v"] = {0.5, 0.5};
    j = json::parse(handle_query(s, shared.dump()).body);
    CHECK(j["p"][1].get<double>() == f.forward(-2.0, 2.5, 1.9, std::vector<double>{0.5, 0.5}, 7000)[0]);
}

TEST_CASE("query errors map to 400 and 404") {
    const ServiceState s = two_models();
    CHECK(handle_query(s, "{not json").status == 400);
    CHECK(handle_query(s, "[1,2]").status == 400);
    json q{{"model", "cup"}, {"theta", 0.3}, {"phi", 1.0}, {"r", 1.5}, {"v", {0.2, 0.4}}, {"f", 500}};
    json bad = q;
    bad["model"] = "teapot";
    CHECK(handle_query(s, bad.dump()).status == 404);
    bad = q;
    bad["r"] = 5.0;
    HttpResult r = handle_query(s, bad.dump());
    CHECK(r.status == 400);
    CHECK(json::parse(r.body)["error"].get<std::string>().find("r out of range") != std::string::npos);
    bad = q;
    bad.erase("f");
    CHECK(handle_query(s, bad.dump()).status == 400);
    bad = q;
    bad.erase("model");  // ambiguous with two models
    CHECK(handle_query(s, bad.dump()).status == 400);
    bad = q;
    bad["theta"] = "north";
    CHECK(handle_query(s, bad.dump()).status == 400);

    ServiceState single;
    single.add("only", fixture_field(2, 1));
    CHECK(handle_query(single, q.dump()).status == 404);
    q.erase("model");
    CHECK(handle_query(single, q.dump()).status == 200);
}

TEST_CASE("ffat endpoint is bit-equal to predict_map") {
    const ServiceState s = two_models();
    const NeuralTransferField& f = *s.find("cup");
    const HttpResult r =
        handle_ffat(s, {{"model", "cup"}, {"f", "440"}, {"v", "0.25,0.75"}, {"r", "1.25"}, {"w", "16"}, {"h", "8"}});
    REQUIRE(r.status == 200);
    const json j = json::parse(r.body);
    const FfatMap m = f.predict_map(std::vector<double>{0.25, 0.75}, 440, 1.25, 16, 8);
    CHECK(j["width"] == 16);
    CHECK(j["height"] == 8);
    REQUIRE(j["values"].size() == m.values.size());
    for (std::size_t i = 0; i < m.values.size(); ++i) CHECK(j["values"][i].get<double>() == m.values[i]);

    const json d = json::parse(handle_ffat(s, {{"model", "ball"}, {"f", "100"}, {"v", "0.5"}}).body);
    CHECK(d["width"] == 64);
    CHECK(d["radius"] == 1.5);
    CHECK(handle_ffat(s, {{"model", "cup"}, {"v", "0.2,0.2"}}).status == 400);
    CHECK(handle_ffat(s, {{"model", "cup"}, {"f", "abc"}, {"v", "0.2,0.2"}}).status == 400);
    CHECK(handle_ffat(s, {{"model", "cup"}, {"f", "440"}, {"v", "0.2,0.2"}, {"w", "1"}}).status == 400);
    CHECK(handle_ffat(s, {{"model", "x"}, {"f", "440"}}).status == 404);
}

TEST_CASE("mask endpoint") {
    const ServiceState s = two_models();
    json req{{"model", "cup"},
             {"trajectory", {{{"v", {0.1, 0.2}}, {"theta", 0.0}, {"phi", 1.0}, {"r", 1.5}},
                             {{"v", {0.3, 0.2}}, {"theta", 1.0}, {"phi", 1.2}, {"r", 1.6}}}},
             {"mask_bins", 16}};
    HttpResult r = handle_mask(s, req.dump());
    REQUIRE(r.status == 200);
    json j = json::parse(r.body);
    CHECK(j["frames"] == 2);
    CHECK(j["mask_bins"] == 16);
    CHECK(j["f_max"] == 8000.0);
    CHECK(j["values"].size() == 32);
    req["frames"] = 5;
    j = json::parse(handle_mask(s, req.dump()).body);
    CHECK(j["frames"] == 5);
    CHECK(j["values"].size() == 80);

    // Default f_max follows a narrower field range.
    json ball{{"model", "ball"}, {"trajectory", {{{"v", {0.5}}, {"theta", 0.0}, {"phi", 1.0}, {"r", 1.5}}}}};
    j = json::parse(handle_mask(s, ball.dump()).body);
    CHECK(j["f_max"] == 600.0);
    ball["f_max"] = 8000;
    CHECK(handle_mask(s, ball.dump()).status == 400);
    req["trajectory"] = json::array();
    CHECK(handle_mask(s, req.dump()).status == 400);
}

TEST_CASE("batched queries are fast and replayable") {
    ServiceState s;
    s.add("big", default_architecture());
    json q{{"theta", json::array()}, {"phi", json::array()}, {"r", json::array()}, {"f", json::array()}, {"v", {0.3, 0.6}}};
    for (int i = 0; i < 2048; ++i) {
        q["theta"].push_back(-3.0 + 6.0 * i / 2048);
        q["phi"].push_back(3.0 * i / 2048);
        q["r"].push_back(1.0 + 1.0 * i / 2048);
        q["f"].push_back(10.0 + 7990.0 * i / 2048);
    }
    const std::string body = q.dump();
    const HttpResult first = handle_query(s, body);
    REQUIRE(first.status == 200);
    double best = 1e300;
    for (int rep = 0; rep < 5; ++rep) {
        const auto t0 = std::chrono::steady_clock::now();
        const HttpResult again = handle_query(s, body);
        best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
        CHECK(again.body == first.body);
    }
    MESSAGE("2048-point query: " << best << " ms");
    CHECK(best <= 150.0);
}

TEST_CASE("model files load with ids from their names") {
    const auto dir = scratch_dir("svc");
    fixture_field(1, 3).save(dir / "alpha.sntf");
    fixture_field(2, 4).save(dir / "beta.sntf");
    const ServiceState s = ServiceState::from_files({dir / "alpha.sntf", dir / "beta.sntf"});
    CHECK(s.find("alpha") != nullptr);
    CHECK(s.find("beta")->conditions() == 2);
    CHECK_THROWS_AS(ServiceState::from_files({}), UsageError);
    CHECK_THROWS_AS(ServiceState::from_files({dir / "alpha.sntf", dir / "alpha.sntf"}), UsageError);
    CHECK_THROWS_AS(ServiceState::from_files({dir / "gamma.sntf"}), DataError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("default port honours the environment") {
    ::unsetenv("SONOFIELD_PORT");
    CHECK(default_port(9000) == 9000);
    ::setenv("SONOFIELD_PORT", "8123", 1);
    CHECK(default_port() == 8123);
    ::setenv("SONOFIELD_PORT", "eighty", 1);
    CHECK_THROWS_AS(default_port(), UsageError);
    ::unsetenv("SONOFIELD_PORT");
}

TEST_CASE("live HTTP server") {
    const auto ui = scratch_dir("ui");
    std::ofstream(ui / "index.html") << "<html>explorer</html>";
    const ServiceState s = two_models();
    LiveServer server(s, ui);
    httplib::Client c("127.0.0.1", server.port);

    auto meta = c.Get("/meta");
    REQUIRE(meta);
    CHECK(meta->status == 200);
    CHECK(json::parse(meta->body)["models"].size() == 2);

    const json q{{"model", "ball"}, {"theta", 0.3}, {"phi", 1.0}, {"r", 1.5}, {"v", {0.2}}, {"f", 300}};
    auto res = c.Post("/query", q.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->body == handle_query(s, q.dump()).body);

    res = c.Get("/ffat?model=cup&f=440&v=0.1,0.9&w=8&h=4");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(json::parse(res->body)["values"].size() == 32);
    res = c.Get("/ffat?model=nope&f=440");
    REQUIRE(res);
    CHECK(res->status == 404);

    const json m{{"model", "ball"}, {"trajectory", {{{"v", {0.5}}, {"theta", 0.0}, {"phi", 1.0}, {"r", 1.5}}}}};
    res = c.Post("/mask", m.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    res = c.Post("/query", "{", "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);

    res = c.Get("/ui/index.html");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->body == "<html>explorer</html>");
    res = c.Get("/nothing");
    REQUIRE(res);
    CHECK(res->status == 404);
    CHECK(json::parse(res->body).contains("error"));
    std::filesystem::remove_all(ui);
}

}  // TEST_SUITE

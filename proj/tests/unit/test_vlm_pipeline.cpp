#include <doctest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <thread>

#include "caloraify/digest.hpp"
#include "caloraify/error.hpp"
#include "caloraify/vlm_pipeline.hpp"
#include "fixtures.hpp"

using namespace caloraify;

namespace {

// Local HTTP server that fails the first `failures` requests with 500.
class FakeVlm {
public:
    explicit FakeVlm(int failures) : failures_(failures) {
        server_.Post("/generate", [this](const httplib::Request& req, httplib::Response& res) {
            ++calls;
            last_body = req.body;
            if (calls <= failures_) {
                res.status = 500;
                return;
            }
            res.set_content(R"({"text":"- 1 cup milk"})", "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeVlm() {
        server_.stop();
        thread_.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/generate"; }

    std::atomic<int> calls{0};
    std::string last_body;

private:
    int failures_;
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

}  // namespace

TEST_CASE("prompt template") {
    CHECK(vlm::build_prompt(vlm::TaskIdentifier::vqa, "  What is this? ") ==
          "[INST]<Img><ImageHere></Img>[vqa] What is this? [/INST]");
    CHECK(vlm::build_prompt(vlm::TaskIdentifier::grounding, "x") == "[INST]<Img><ImageHere></Img>[grounding] x [/INST]");
    CHECK_THROWS_AS(vlm::build_prompt(vlm::TaskIdentifier::vqa, " \n"), ArgumentError);
}

TEST_CASE("fixture images hash to the stub keys") {
    CHECK(fixtures::png("fixture_dish.png").digest() == "6f0131ac5c655a87b23e4981e6688eff0929ea3ccf456102753fa9c899bf94b5");
    CHECK(fixtures::png("fixture_blank.png").digest() == "1ce33ce6cfc40a0f86ec4dc725970c51896c446915498d157b06f49f23f029e2");
}

TEST_CASE_FIXTURE(fixtures::Stack, "stub analysis of the fixture dish") {
    const auto img = fixtures::png("fixture_dish.png");
    const auto a = vlm::analyze_image(img, backend, *index, kb, config);
    CHECK(a.stage1_text == "- 2 cups flour\n- 3 eggs");
    CHECK(a.parsed.size() == 2);
    CHECK(a.report.total_kcal == doctest::Approx(820.0).epsilon(1e-12));
    CHECK(a.final_answer == "flour — 200.0 g — 700 kcal\neggs — 150.0 g — 120 kcal\nTOTAL: 820 kcal");
    CHECK(vlm::analyze_image(img, backend, *index, kb, config) == a);

    const auto blank = vlm::analyze_image(fixtures::png("fixture_blank.png"), backend, *index, kb, config);
    CHECK(blank.parsed.empty());
    CHECK(blank.final_answer == vlm::kNoIngredientsMessage);

    CHECK_THROWS_AS(vlm::analyze_image(vlm::Image{{}, "image/png"}, backend, *index, kb, config), ArgumentError);
}

TEST_CASE_FIXTURE(fixtures::Stack, "chat turns and follow-ups") {
    vlm::PipelineDeps deps{backend, *index, kb, config};
    vlm::ChatSession s("s1");
    CHECK(vlm::chat_turn(s, "hi", nullptr, deps) == vlm::kNoAnalysisMessage);
    const auto img = fixtures::png("fixture_dish.png");
    CHECK(vlm::chat_turn(s, "what is this?", &img, deps).find("TOTAL: 820 kcal") != std::string::npos);
    CHECK(vlm::chat_turn(s, "How many calories in the eggs?", nullptr, deps) == "eggs: 120 kcal");
    CHECK(vlm::chat_turn(s, "how many calories in total?", nullptr, deps) == "TOTAL: 820 kcal");
    CHECK(vlm::chat_turn(s, "which source did flour match?", nullptr, deps).starts_with("flour: 700 kcal (evidence: flour-01"));
    CHECK(vlm::chat_turn(s, "list the ingredients", nullptr, deps) == "flour: 200.0 g\neggs: 150.0 g");
    CHECK(s.turns().size() == 12);
    CHECK(s.turns()[2].image_digest == img.digest());

    s.append(vlm::Role::user, "dangling");
    CHECK_THROWS_AS(vlm::chat_turn(s, "again", nullptr, deps), ArgumentError);
    CHECK(s.turns().size() == 13);
    CHECK_THROWS_AS(s.append(vlm::Role::user, "x"), ArgumentError);
}

TEST_CASE_FIXTURE(fixtures::Stack, "forward follow-up mode sends context to the backend") {
    FakeVlm fake(0);
    vlm::HttpBackend http({fake.url(), 2000, 0});
    config.followup = vlm::FollowupMode::forward;
    vlm::PipelineDeps deps{http, *index, kb, config};
    vlm::ChatSession s("f");
    const auto img = fixtures::png("fixture_dish.png");
    vlm::chat_turn(s, "analyze", &img, deps);
    vlm::chat_turn(s, "is this healthy?", nullptr, deps);
    const auto body = nlohmann::json::parse(fake.last_body);
    const std::string prompt = body.at("prompt");
    CHECK(prompt.find("[vqa] Nutrition context: milk 243.7 g matched milk-01 = 149 kcal") != std::string::npos);
    CHECK(prompt.find("Question: is this healthy? [/INST]") != std::string::npos);
    CHECK(body.at("image_b64") == base64_encode(img.bytes));
}

TEST_CASE("http backend retries then gives up") {
    vlm::PromptEnvelope p{"prompt", {}, "image/png", 16};
    std::vector<std::uint8_t> bytes = {1, 2, 3};
    p.image_bytes = bytes;
    {
        FakeVlm fake(2);
        vlm::HttpBackend http({fake.url(), 2000, 2});
        CHECK(http.generate(p) == "- 1 cup milk");
        CHECK(fake.calls == 3);
    }
    {
        FakeVlm fake(100);
        vlm::HttpBackend http({fake.url(), 2000, 1});
        CHECK_THROWS_AS(http.generate(p), TransportError);
        CHECK(fake.calls == 2);
    }
    {
        vlm::HttpBackend http({"http://127.0.0.1:1/none", 500, 0});
        CHECK_THROWS_AS(http.generate(p), TransportError);
    }
    CHECK_THROWS_AS(vlm::HttpBackend({"", 10, 0}), ArgumentError);
}

#include <gtest/gtest.h>

#include <set>

#include "agent/ensemble.hpp"

using namespace agent::ensemble;

namespace {

std::vector<std::string> ids(const std::string& prefix, std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
    return out;
}

std::vector<ModelVerdict> verdicts(const std::vector<std::pair<std::string, double>>& v, const std::string& qid = "q") {
    std::vector<ModelVerdict> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back({"m" + std::to_string(i), qid, v[i].first, v[i].second});
    return out;
}

json prediction_file(const std::string& model, const std::vector<std::string>& qids, double confidence = 0.5) {
    json preds = json::object();
    for (const auto& q : qids) preds[q] = {{"text", q == "q0" ? "" : "ans"}, {"confidence", confidence}};
    return {{"model_id", model}, {"predictions", preds}};
}

}  // namespace

TEST(RequiredUnanswerable, FloorsLikeThePublishedSplit) {
    EXPECT_EQ(required_unanswerable(87599, 0.5), 43799u);
    EXPECT_EQ(required_unanswerable(100, 0.5), 50u);
    EXPECT_EQ(required_unanswerable(3, 1.0), 3u);
}

TEST(SampleAdversarialTraining, HundredAnswerable) {
    const auto cands = ids("c", 120);
    const auto split = sample_adversarial_training(ids("a", 100), cands, 0.5, 42);
    EXPECT_EQ(split.train_answerable.size(), 100u);
    EXPECT_EQ(split.train_unanswerable.size(), 50u);
    EXPECT_EQ(split.held_out_candidates.size(), 70u);
    std::set<std::string> train(split.train_unanswerable.begin(), split.train_unanswerable.end());
    for (const auto& h : split.held_out_candidates) EXPECT_FALSE(train.count(h));
    std::set<std::string> all(train);
    all.insert(split.held_out_candidates.begin(), split.held_out_candidates.end());
    EXPECT_EQ(all.size(), cands.size());
}

TEST(SampleAdversarialTraining, DeterministicPerSeed) {
    const auto a = sample_adversarial_training(ids("a", 40), ids("c", 60), 0.5, 7);
    const auto b = sample_adversarial_training(ids("a", 40), ids("c", 60), 0.5, 7);
    const auto c = sample_adversarial_training(ids("a", 40), ids("c", 60), 0.5, 8);
    EXPECT_EQ(a.train_unanswerable, b.train_unanswerable);
    EXPECT_NE(a.train_unanswerable, c.train_unanswerable);
}

TEST(SampleAdversarialTraining, ExactFitLeavesNothingHeldOut) {
    const auto split = sample_adversarial_training(ids("a", 20), ids("c", 10), 0.5, 1);
    EXPECT_TRUE(split.held_out_candidates.empty());
    EXPECT_EQ(split.train_unanswerable.size(), 10u);
}

TEST(SampleAdversarialTraining, Errors) {
    try {
        sample_adversarial_training(ids("a", 20), ids("c", 9), 0.5, 1);
        FAIL() << "expected an error";
    } catch (const agent::ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("required 10"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("available 9"), std::string::npos);
    }
    EXPECT_THROW(sample_adversarial_training(ids("a", 2), ids("c", 9), 0.0, 1), agent::ValidationError);
    EXPECT_THROW(sample_adversarial_training(ids("a", 2), ids("c", 9), 1.5, 1), agent::ValidationError);
}

TEST(SampleAdversarialTraining, EachCandidateEquallyLikely) {
    // 4 of 8 drawn per trial: expected hit count per candidate is trials / 2.
    const int trials = 8000;
    std::vector<int> hits(8, 0);
    const auto cands = ids("c", 8);
    for (int t = 0; t < trials; ++t)
        for (const auto& c : sample_adversarial_training(ids("a", 8), cands, 0.5, t).train_unanswerable)
            ++hits[std::stoi(c.substr(1))];
    const double sd = std::sqrt(trials * 0.25);
    for (int h : hits) EXPECT_NEAR(h, trials / 2.0, 4 * sd);
}

TEST(LoadPredictions, MergesSixModels) {
    std::vector<PredictionFile> files;
    for (int m = 0; m < 6; ++m)
        files.push_back(parse_prediction_file(prediction_file("m" + std::to_string(m), ids("q", 10)), "f"));
    const auto merged = merge_predictions(files);
    ASSERT_EQ(merged.size(), 10u);
    for (const auto& [qid, v] : merged) {
        ASSERT_EQ(v.size(), 6u);
        EXPECT_EQ(v[3].model_id, "m3");
    }
}

TEST(LoadPredictions, CoverageGapNamesModelAndQid) {
    std::vector<PredictionFile> files{parse_prediction_file(prediction_file("full", ids("q", 10)), "a"),
                                      parse_prediction_file(prediction_file("short", ids("q", 9)), "b")};
    try {
        merge_predictions(files);
        FAIL() << "expected coverage error";
    } catch (const agent::IntegrityError& e) {
        EXPECT_NE(std::string(e.what()).find("(short, q9)"), std::string::npos) << e.what();
    }
    EXPECT_THROW(merge_predictions({files[0]}, {"q0", "q99"}), agent::IntegrityError);
}

TEST(LoadPredictions, ConfidenceOutOfRange) {
    EXPECT_THROW(parse_prediction_file(prediction_file("m", {"q1"}, 1.3), "f"), agent::ValidationError);
    EXPECT_THROW(parse_prediction_file(prediction_file("m", {"q1"}, -0.1), "f"), agent::ValidationError);
    EXPECT_NO_THROW(parse_prediction_file(prediction_file("m", {"q1"}, 1.0), "f"));
}

TEST(LoadPredictions, SchemaErrors) {
    EXPECT_THROW(parse_prediction_file(json::array(), "f"), agent::ParseError);
    EXPECT_THROW(parse_prediction_file({{"predictions", json::object()}}, "f"), agent::ParseError);
    json bad = prediction_file("m", {"q1"});
    bad["predictions"]["q1"].erase("confidence");
    EXPECT_THROW(parse_prediction_file(bad, "f"), agent::ParseError);
}

TEST(Summarize, AllAbstain) {
    const auto s = summarize(verdicts({{"", 0.9}, {"", 0.9}, {"", 0.9}, {"", 0.9}, {"", 0.9}, {"", 0.9}}));
    EXPECT_EQ(s.n_a, 0);
    EXPECT_EQ(s.n_u, 6);
    EXPECT_EQ(s.c_a, 0.0);
    EXPECT_NEAR(s.c_u, 5.4, 1e-12);
}

TEST(Summarize, MixedVotes) {
    const auto s = summarize(verdicts({{"x", 0.8}, {"y", 0.7}, {"", 0.9}, {"", 0.9}, {"", 0.9}, {"", 0.5}}));
    EXPECT_EQ(s.n_a, 2);
    EXPECT_NEAR(s.c_a, 1.5, 1e-12);
    EXPECT_EQ(s.n_u, 4);
    EXPECT_NEAR(s.c_u, 3.2, 1e-12);
    EXPECT_EQ(s.difficulty(), 2);
    EXPECT_EQ(s.n_models(), 6);
}

TEST(Summarize, SingleVerdictAndErrors) {
    const auto s = summarize(verdicts({{"x", 1.0}}));
    EXPECT_EQ(s.n_a, 1);
    EXPECT_EQ(s.c_a, 1.0);
    EXPECT_EQ(s.n_u, 0);
    EXPECT_EQ(s.c_u, 0.0);
    EXPECT_THROW(summarize({}), agent::ValidationError);
    auto mixed = verdicts({{"x", 1.0}, {"y", 1.0}});
    mixed[1].qid = "other";
    EXPECT_THROW(summarize(mixed), agent::ValidationError);
}

TEST(Summarize, InvariantsOnRandomVerdicts) {
    std::mt19937 rng(3);
    for (int t = 0; t < 500; ++t) {
        std::vector<std::pair<std::string, double>> v;
        const int n = 1 + static_cast<int>(rng() % 8);
        for (int i = 0; i < n; ++i) v.push_back({rng() % 2 ? "a" : "", (rng() % 1001) / 1000.0});
        const auto s = summarize(verdicts(v));
        EXPECT_EQ(s.n_a + s.n_u, n);
        EXPECT_LE(s.c_a, s.n_a + 1e-12);
        EXPECT_LE(s.c_u, s.n_u + 1e-12);
    }
}

TEST(MarkChallenging, ThresholdAtTwoVotes) {
    std::vector<EnsembleSummary> summaries;
    for (int n_a = 0; n_a <= 6; ++n_a) summaries.push_back({"q" + std::to_string(n_a), n_a, 6 - n_a, 0.5 * n_a, 0.5 * (6 - n_a)});
    EXPECT_EQ(mark_challenging(summaries), (std::vector<std::string>{"q2", "q3", "q4", "q5", "q6"}));
    EXPECT_EQ(mark_challenging(summaries, 6), (std::vector<std::string>{"q6"}));
}

TEST(SummaryJson, RoundTrip) {
    const EnsembleSummary s{"q", 2, 4, 1.5, 3.2};
    const auto back = summary_from_json(to_json(s));
    EXPECT_EQ(back.qid, "q");
    EXPECT_EQ(back.n_a, 2);
    EXPECT_EQ(back.c_u, 3.2);
}

#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <random>
#include <set>

#include "agent/corpus.hpp"
#include "agent/error.hpp"

using namespace agent::corpus;
using json = nlohmann::json;

namespace {

json squad_v1(std::vector<std::pair<std::string, std::string>> title_context,
              std::vector<std::tuple<std::size_t, std::string, std::string, std::string, std::size_t>> qas) {
    json data = json::array();
    for (const auto& [title, ctx] : title_context) {
        data.push_back({{"title", title}, {"paragraphs", {{{"context", ctx}, {"qas", json::array()}}}}});
    }
    for (const auto& [article, id, question, answer, start] : qas) {
        data[article]["paragraphs"][0]["qas"].push_back(
            {{"id", id}, {"question", question}, {"answers", {{{"text", answer}, {"answer_start", start}}}}});
    }
    return {{"version", "1.1"}, {"data", data}};
}

HotpotRecord hotpot_record(std::vector<std::pair<std::string, std::string>> paras, std::set<std::string> support,
                           std::string answer) {
    HotpotRecord rec;
    rec.qid = "h1";
    rec.question = "When was Alpha born?";
    rec.answer = std::move(answer);
    for (auto& [title, text] : paras) {
        rec.paragraphs.push_back({title, {text}});
        (support.count(title) ? rec.supporting_titles : rec.distractor_titles).push_back(title);
    }
    return rec;
}

std::filesystem::path temp_path(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "agent_corpus_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST(LoadSquad, CountsDocsAndExamples) {
    const auto ds = parse_squad(squad_v1({{"A", "Alpha born 1900."}, {"B", "Beta died 1950."}},
                                         {{0, "q1", "When?", "1900", 11}, {1, "q2", "When?", "1950", 10}}),
                                SquadVersion::v1_1);
    EXPECT_EQ(ds.docs.size(), 2u);
    ASSERT_EQ(ds.examples.size(), 2u);
    for (const auto& ex : ds.examples) EXPECT_TRUE(ex.is_answerable);
    EXPECT_EQ(ds.examples[1].context_ref, ds.docs[1].doc_id);
}

TEST(LoadSquad, ImpossibleFlagMakesUnanswerable) {
    json root{{"version", "v2.0"},
              {"data",
               {{{"title", "T"},
                 {"paragraphs",
                  {{{"context", "Some text."},
                    {"qas", {{{"id", "u1"}, {"question", "Why?"}, {"answers", json::array()}, {"is_impossible", true}}}}}}}}}}};
    const auto ds = parse_squad(root, SquadVersion::v2_0);
    ASSERT_EQ(ds.examples.size(), 1u);
    EXPECT_FALSE(ds.examples[0].is_answerable);
    EXPECT_TRUE(ds.examples[0].answers.empty());
}

TEST(LoadSquad, DeduplicatesIdenticalParagraphs) {
    const auto ds = parse_squad(squad_v1({{"A", "Same text."}, {"A", "Same text."}, {"B", "Same text."}},
                                         {{0, "q1", "?", "Same", 0}, {1, "q2", "?", "text", 5}, {2, "q3", "?", "Same", 0}}),
                                SquadVersion::v1_1);
    EXPECT_EQ(ds.docs.size(), 2u);  // (A, text) once, (B, text) separately
    EXPECT_EQ(ds.examples[0].context_ref, ds.examples[1].context_ref);
    EXPECT_NE(ds.examples[0].context_ref, ds.examples[2].context_ref);
}

TEST(LoadSquad, SpanPastEndIsIntegrityErrorNamingQid) {
    const auto bad = squad_v1({{"A", "Alpha born 1900."}}, {{0, "bad-q", "When?", "1900", 14}});
    try {
        parse_squad(bad, SquadVersion::v1_1);
        FAIL() << "expected IntegrityError";
    } catch (const agent::ParseError&) {
        FAIL() << "span mismatch should not be reported as a schema error";
    } catch (const agent::IntegrityError& e) {
        EXPECT_NE(std::string(e.what()).find("bad-q"), std::string::npos);
    }
}

TEST(LoadSquad, SchemaViolationNamesJsonPath) {
    json root{{"data", {{{"title", "A"}, {"paragraphs", {{{"context", "x"}, {"qas", {{{"id", "q"}}}}}}}}}}};
    try {
        parse_squad(root, SquadVersion::v1_1);
        FAIL() << "expected ParseError";
    } catch (const agent::ParseError& e) {
        EXPECT_EQ(e.json_path(), "$.data[0].paragraphs[0].qas[0].question");
    }
    EXPECT_THROW(parse_squad(json{{"nodata", 1}}, SquadVersion::v1_1), agent::ParseError);
}

TEST(LoadSquad, OffsetsCountCodePoints) {
    // "Café 1900": 'é' is two bytes but one character, so "1900" starts at character 5.
    const auto ds = parse_squad(squad_v1({{"A", "Caf\xC3\xA9 1900"}}, {{0, "q", "?", "1900", 5}}), SquadVersion::v1_1);
    EXPECT_EQ(ds.examples[0].answers[0].answer_start, 5u);
}

TEST(EmitSquad2, EmptyDatasetIsValid) {
    const auto j = to_squad2_json({}, {});
    EXPECT_TRUE(j["data"].is_array());
    EXPECT_TRUE(j["data"].empty());
    const auto path = temp_path("empty.json");
    emit_squad2({}, {}, path);
    EXPECT_TRUE(load_squad(path, SquadVersion::v2_0).examples.empty());
}

TEST(EmitSquad2, ImpossibleFlagMapping) {
    std::vector<ContextDoc> docs{{"d1", "T", "Alpha born 1900."}};
    std::vector<QAExample> exs{{"a", "When?", "d1", {{"1900", 11}}, true, Origin::Original},
                               {"u", "Where?", "d1", {}, false, Origin::Final}};
    const auto j = to_squad2_json(docs, exs);
    const auto& qas = j["data"][0]["paragraphs"][0]["qas"];
    EXPECT_FALSE(qas[0]["is_impossible"].get<bool>());
    EXPECT_TRUE(qas[1]["is_impossible"].get<bool>());
}

TEST(EmitSquad2, DanglingContextRefListsQids) {
    std::vector<QAExample> exs{{"lost", "?", "nowhere", {}, false, Origin::Original}};
    try {
        to_squad2_json({}, exs);
        FAIL();
    } catch (const agent::IntegrityError& e) {
        EXPECT_NE(std::string(e.what()).find("lost"), std::string::npos);
    }
}

TEST(EmitSquad2, RoundTripTwentyQuestions) {
    std::mt19937 rng(3);
    std::vector<ContextDoc> docs;
    std::vector<QAExample> exs;
    for (int d = 0; d < 7; ++d)
        docs.push_back({"doc" + std::to_string(d), "Title " + std::to_string(d % 3),
                        "Paragraph " + std::to_string(d) + " mentions year " + std::to_string(1900 + d) + " and \xC3\xA9t\xC3\xA9."});
    for (int q = 0; q < 20; ++q) {
        const auto& doc = docs[rng() % docs.size()];
        QAExample ex;
        ex.qid = "q" + std::to_string(q);
        ex.question = "Question " + std::to_string(q) + "?";
        ex.context_ref = doc.doc_id;
        if (q % 3 != 0) {
            const auto pos = doc.text.find("year");
            ex.answers.push_back({"year", agent::unicode::char_offset(doc.text, pos)});
        }
        ex.is_answerable = !ex.answers.empty();
        exs.push_back(ex);
    }
    const auto path = temp_path("roundtrip.json");
    emit_squad2(docs, exs, path);
    const auto back = load_squad(path, SquadVersion::v2_0);
    ASSERT_EQ(back.examples.size(), exs.size());

    std::map<std::string, std::string> orig_text;
    for (const auto& d : docs) orig_text[d.doc_id] = d.text;
    const auto lookup = back.doc_lookup();
    std::map<std::string, const QAExample*> by_qid;
    for (const auto& ex : back.examples) by_qid[ex.qid] = &ex;
    for (const auto& ex : exs) {
        const auto* b = by_qid.at(ex.qid);
        EXPECT_EQ(b->question, ex.question);
        EXPECT_EQ(b->answers, ex.answers);
        EXPECT_EQ(b->is_answerable, ex.is_answerable);
        EXPECT_EQ(back.docs[lookup.at(b->context_ref)].text, orig_text.at(ex.context_ref));
    }
}

TEST(HotpotAnswerable, ConcatenatesSupportingParagraphs) {
    const auto rec = hotpot_record({{"P1", "Alpha born 1900."}, {"X", "Noise."}, {"P2", "Beta died 1950."}},
                                   {"P1", "P2"}, "1900");
    const auto conv = convert_hotpot_answerable(rec);
    ASSERT_TRUE(conv);
    EXPECT_EQ(conv->first.text, "Alpha born 1900. Beta died 1950.");
    EXPECT_EQ(conv->second.answers[0].answer_start, 11u);
    EXPECT_TRUE(span_matches(conv->first.text, conv->second.answers[0]));
}

TEST(HotpotAnswerable, FollowsRecordOrderNotTitleOrder) {
    const auto rec = hotpot_record({{"Zeta", "Beta died 1950."}, {"Alpha", "Alpha born 1900."}}, {"Alpha", "Zeta"}, "1900");
    const auto conv = convert_hotpot_answerable(rec);
    ASSERT_TRUE(conv);
    EXPECT_EQ(conv->first.text, "Beta died 1950. Alpha born 1900.");
    EXPECT_EQ(conv->second.answers[0].answer_start, 27u);
}

TEST(HotpotAnswerable, MissingAnswerIsSkippedAndReported) {
    const auto rec = hotpot_record({{"P1", "Alpha born 1900."}, {"P2", "Beta died 1950."}}, {"P1", "P2"}, "yes");
    SkipReport report;
    EXPECT_FALSE(convert_hotpot_answerable(rec, &report));
    EXPECT_EQ(report.skipped, 1u);
}

TEST(HotpotUnanswerable, TwoDistractorsAlwaysUsed) {
    const auto rec = hotpot_record({{"S1", "s1."}, {"S2", "s2."}, {"D1", "First."}, {"D2", "Second."}}, {"S1", "S2"}, "x");
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto out = make_hotpot_unanswerable(rec, seed);
        ASSERT_TRUE(out);
        EXPECT_EQ(out->first.text, "First. Second.");
        EXPECT_FALSE(out->second.is_answerable);
        EXPECT_TRUE(out->second.answers.empty());
    }
}

TEST(HotpotUnanswerable, DeterministicPerSeed) {
    std::vector<std::pair<std::string, std::string>> paras{{"S1", "a."}, {"S2", "b."}};
    for (int d = 0; d < 8; ++d) paras.push_back({"D" + std::to_string(d), "d" + std::to_string(d) + "."});
    const auto rec = hotpot_record(paras, {"S1", "S2"}, "x");
    EXPECT_EQ(make_hotpot_unanswerable(rec, 42)->first.text, make_hotpot_unanswerable(rec, 42)->first.text);
}

TEST(HotpotUnanswerable, FewerThanTwoDistractorsSkipped) {
    const auto rec = hotpot_record({{"S1", "a."}, {"S2", "b."}, {"D1", "c."}}, {"S1", "S2"}, "a");
    SkipReport report;
    EXPECT_FALSE(make_hotpot_unanswerable(rec, 1, &report));
    EXPECT_EQ(report.skipped, 1u);
}

TEST(HotpotUnanswerable, PairFrequenciesUniformOverTwentyEightPairs) {
    std::vector<std::pair<std::string, std::string>> paras{{"S1", "a."}, {"S2", "b."}};
    for (int d = 0; d < 8; ++d) paras.push_back({"D" + std::to_string(d), "d" + std::to_string(d) + "."});
    const auto rec = hotpot_record(paras, {"S1", "S2"}, "x");
    std::map<std::string, int> freq;
    const int draws = 10000;
    for (int s = 0; s < draws; ++s) ++freq[make_hotpot_unanswerable(rec, static_cast<std::uint64_t>(s))->first.text];
    ASSERT_EQ(freq.size(), 28u);
    const double p = 1.0 / 28.0;
    const double mean = draws * p;
    const double sigma = std::sqrt(draws * p * (1 - p));
    for (const auto& [pair, n] : freq) EXPECT_NEAR(n, mean, 3 * sigma) << pair;
}

TEST(ParseHotpot, SplitsSupportingAndDistractors) {
    json root = json::array({{{"_id", "x1"},
                              {"question", "Q?"},
                              {"answer", "yes"},
                              {"supporting_facts", json::array({json::array({"B", 0}), json::array({"A", 1}), json::array({"B", 1})})},
                              {"context", json::array({json::array({"A", {"a0.", " a1."}}),
                                                       json::array({"C", json::array({"c."})}),
                                                       json::array({"B", {"b0.", " b1."}})})}}});
    const auto recs = parse_hotpot(root);
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].supporting_titles, (std::vector<std::string>{"A", "B"}));
    EXPECT_EQ(recs[0].distractor_titles, (std::vector<std::string>{"C"}));
    EXPECT_EQ(recs[0].paragraph("A")->text(), "a0. a1.");
}

TEST(Manifest, FunnelAndUpsert) {
    DatasetManifest m;
    m.upsert({"candidates", 200, 1, {}});
    m.upsert({"mark-challenging", 40, 2, {}});
    m.upsert({"apply-filter", 30, 3, {}});
    EXPECT_TRUE(m.funnel_non_increasing());
    m.upsert({"apply-filter", 50, 3, {}});
    EXPECT_EQ(m.records().size(), 3u);
    EXPECT_FALSE(m.funnel_non_increasing());
    const auto back = DatasetManifest::from_json(m.to_json());
    EXPECT_EQ(back.find("apply-filter")->count, 50u);
}

#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "overgen/corpus.hpp"
#include "overgen/error.hpp"
#include "overgen/hashing.hpp"
#include "overgen/random.hpp"
#include "overgen/serialization.hpp"

using namespace overgen;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("overgen-test-" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

void write(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

}  // namespace

TEST(Hashing, Sha256KnownVector) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Hashing, StableHashDependsOnSeed) {
    EXPECT_EQ(stable_hash64("x", 1), stable_hash64("x", 1));
    EXPECT_NE(stable_hash64("x", 1), stable_hash64("x", 2));
    EXPECT_NE(derive_seed(7, "a"), derive_seed(7, "b"));
}

TEST(Random, DerivedStreamsReproducible) {
    auto a = Rng::derive(3, "t");
    auto b = Rng::derive(3, "t");
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
    Rng r(1);
    for (int i = 0; i < 1000; ++i) EXPECT_LT(r.uniform_index(7), 7u);
}

TEST(Types, DecodeRoundTrip) {
    EXPECT_EQ(Decode::parse(Decode::greedy().to_string()), Decode::greedy());
    EXPECT_EQ(Decode::parse(Decode::sampled(3).to_string()), Decode::sampled(3));
    EXPECT_THROW(Decode::sampled(0), PreconditionError);
}

TEST(Types, InstanceValidation) {
    auto ok = fixtures::cqa_prompt_target();
    EXPECT_NO_THROW(validate(ok));
    auto bad = ok;
    bad.gold_label = "not a choice";
    EXPECT_THROW(validate(bad), InvariantError);
    auto nli = fixtures::snli_prompt_target();
    nli.gold_label = "maybe";
    EXPECT_THROW(validate(nli), InvariantError);
}

TEST(Serialization, JsonlRoundTrip) {
    auto dir = temp_dir("jsonl");
    std::vector<TaskInstance> xs{fixtures::cqa_prompt_target(), fixtures::snli_prompt_target()};
    jsonl::write_records(dir / "i.jsonl", entity::instances, xs);
    EXPECT_EQ(jsonl::read_records<TaskInstance>(dir / "i.jsonl", entity::instances), xs);

    Judgment j;
    j.judgment_id = "j1";
    j.study_id = "s";
    j.annotator_id = "a";
    j.subject_id = "c";
    j.kind = JudgmentKind::absolute;
    AbsolutePayload p;
    p.factuality = Factuality::generally_true;
    p.new_info = true;
    p.supports_label = true;
    p.amount_info = AmountInfo::enough;
    j.payload = p;
    std::vector<Judgment> js{j};
    jsonl::write_records(dir / "j.jsonl", entity::judgments, js);
    EXPECT_EQ(jsonl::read_records<Judgment>(dir / "j.jsonl", entity::judgments), js);
}

TEST(Serialization, HeaderChecked) {
    auto dir = temp_dir("header");
    write(dir / "v2.jsonl", "{\"schema_version\":2,\"entity\":\"instances\"}\n");
    EXPECT_THROW(jsonl::read(dir / "v2.jsonl", entity::instances), SchemaVersionError);
    write(dir / "wrong.jsonl", "{\"schema_version\":1,\"entity\":\"labels\"}\n");
    EXPECT_THROW(jsonl::read(dir / "wrong.jsonl", entity::instances), SchemaVersionError);
    write(dir / "garbage.jsonl", "{\"schema_version\":1,\"entity\":\"instances\"}\n{oops\n");
    EXPECT_THROW(jsonl::read(dir / "garbage.jsonl", entity::instances), ParseError);
    EXPECT_THROW(jsonl::read(dir / "missing.jsonl", entity::instances), IoError);
}

TEST(Corpus, CsvIngest) {
    auto dir = temp_dir("csv");
    write(dir / "c.csv",
          "id,question,choices,gold_label\n"
          "q1,\"Where, exactly?\",a|b|c,b\n"
          "q2,Why?,x|y,y\n");
    auto xs = ingest_corpus(dir / "c.csv", CorpusFormat::csv);
    ASSERT_EQ(xs.size(), 2u);
    EXPECT_EQ(xs[0].question, "Where, exactly?");
    EXPECT_EQ(xs[0].choices, (std::vector<std::string>{"a", "b", "c"}));
}

TEST(Corpus, DuplicateIdsRejected) {
    auto dir = temp_dir("dup");
    write(dir / "c.csv", "id,question,choices,gold_label\nq1,A?,a|b,a\nq1,B?,a|b,b\n");
    EXPECT_THROW(ingest_corpus(dir / "c.csv", CorpusFormat::csv), DuplicateIdError);
}

TEST(Corpus, JsonlIngestValidates) {
    auto dir = temp_dir("jin");
    write(dir / "c.jsonl",
          "{\"schema_version\":1,\"entity\":\"instances\"}\n"
          "{\"id\":\"n1\",\"task\":\"nli\",\"premise\":\"p\",\"hypothesis\":\"h\",\"gold_label\":\"bogus\","
          "\"split\":\"train\"}\n");
    EXPECT_THROW(ingest_corpus(dir / "c.jsonl", CorpusFormat::jsonl), InvariantError);
}

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <map>

#include "ampgan/dataset.hpp"
#include "ampgan/toy.hpp"

using namespace ampgan;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

std::vector<ManifestEntry> fake_entries(int n, Role role, const std::string& tone) {
    std::vector<ManifestEntry> out;
    for (int i = 0; i < n; ++i)
        out.push_back({"file_" + std::to_string(i) + ".wav", role, tone});
    return out;
}

std::shared_ptr<AudioBuffer> ramp_buffer(std::int64_t n, float base) {
    auto buf = std::make_shared<AudioBuffer>();
    buf->sample_rate = kCanonicalRate;
    buf->samples.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i)
        buf->samples[static_cast<std::size_t>(i)] = base + static_cast<float>(i) * 1e-6f;
    return buf;
}

SegmentPool pool_of(std::shared_ptr<AudioBuffer> buf, int count, std::int64_t len, Role role) {
    SegmentPool p;
    for (int i = 0; i < count; ++i) {
        Segment s;
        s.buffer = buf;
        s.offset = i * len;
        s.length = len;
        s.role = role;
        p.push_back(s);
    }
    return p;
}

}  // namespace

TEST_CASE("split: 100 sources give 80/10/10", "[dataset]") {
    auto entries = fake_entries(100, Role::rendered, "amp");
    auto splits = split_sources(entries, 7);
    std::map<Split, int> counts;
    for (Split s : splits) counts[s]++;
    REQUIRE(counts[Split::train] == 80);
    REQUIRE(counts[Split::val] == 10);
    REQUIRE(counts[Split::test] == 10);
}

TEST_CASE("split: floor rule for 10 sources", "[dataset]") {
    auto entries = fake_entries(10, Role::clean, "amp");
    auto splits = split_sources(entries, 3);
    std::map<Split, int> counts;
    for (Split s : splits) counts[s]++;
    REQUIRE(counts[Split::train] == 8);
    REQUIRE(counts[Split::val] == 1);
    REQUIRE(counts[Split::test] == 1);
}

TEST_CASE("split: deterministic under seed, partitions the input", "[dataset]") {
    auto entries = fake_entries(37, Role::clean, "a");
    auto more = fake_entries(23, Role::rendered, "a");
    entries.insert(entries.end(), more.begin(), more.end());
    auto s1 = split_sources(entries, 42);
    auto s2 = split_sources(entries, 42);
    REQUIRE(s1 == s2);
    auto s3 = split_sources(entries, 43);
    REQUIRE(s1 != s3);  // overwhelmingly likely for 60 files
    REQUIRE(s1.size() == entries.size());
}

TEST_CASE("split: fewer than 3 sources in a group is an error", "[dataset]") {
    auto entries = fake_entries(2, Role::clean, "amp");
    REQUIRE_THROWS_AS(split_sources(entries, 1), DataError);
    REQUIRE_THROWS_AS(split_sources(fake_entries(5, Role::clean, "x"), 1, 0.5, 0.2, 0.2),
                      ConfigError);  // ratios must sum to 1
}

TEST_CASE("split: fractions hold per (role, tone) group", "[dataset]") {
    std::vector<ManifestEntry> entries;
    for (auto& e : fake_entries(20, Role::clean, "a")) entries.push_back(e);
    for (auto& e : fake_entries(10, Role::rendered, "a")) entries.push_back(e);
    for (auto& e : fake_entries(10, Role::rendered, "b")) entries.push_back(e);
    auto splits = split_sources(entries, 5);
    std::map<std::pair<std::string, int>, int> train_counts;
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (splits[i] == Split::train)
            train_counts[{entries[i].tone_label, entries[i].role == Role::clean ? 0 : 1}]++;
    REQUIRE(train_counts[{"a", 0}] == 16);
    REQUIRE(train_counts[{"a", 1}] == 8);
    REQUIRE(train_counts[{"b", 1}] == 8);
}

TEST_CASE("manifest round trip and validation", "[dataset]") {
    const std::string dir = (fs::temp_directory_path() / "ampgan_ds").string();
    fs::create_directories(dir);
    const std::string path = dir + "/m.json";
    std::vector<ManifestEntry> entries = {{"a.wav", Role::clean, "t"},
                                          {"b.wav", Role::rendered, "t"}};
    write_manifest(path, entries);
    auto loaded = load_manifest(path);
    REQUIRE(loaded.size() == 2);
    REQUIRE(loaded[0].path == "a.wav");
    REQUIRE(loaded[1].role == Role::rendered);

    {
        std::ofstream f(dir + "/bad.json");
        f << R"([{"path":"x.wav","role":"clean","tone_label":"t","extra":1}])";
    }
    REQUIRE_THROWS_AS(load_manifest(dir + "/bad.json"), DataError);
    {
        std::ofstream f(dir + "/role.json");
        f << R"([{"path":"x.wav","role":"wet","tone_label":"t"}])";
    }
    REQUIRE_THROWS_AS(load_manifest(dir + "/role.json"), DataError);
}

TEST_CASE("unpaired batch: forced copies with a single segment", "[dataset]") {
    auto buf = ramp_buffer(64, 0.1f);
    SegmentPool clean = pool_of(buf, 1, 64, Role::clean);
    SegmentPool rendered = pool_of(buf, 1, 64, Role::rendered);
    Rng rng(1);
    UnpairedBatch b = make_unpaired_batch({&clean}, rendered, 4, rng, true);
    REQUIRE(b.clean.dim(0) == 4);
    for (int i = 0; i < 4; ++i)
        REQUIRE(b.clean.at(i, 0, 5) == buf->samples[5]);
}

TEST_CASE("unpaired batch: deterministic under rng state", "[dataset]") {
    auto buf = ramp_buffer(4096, 0.0f);
    SegmentPool clean = pool_of(buf, 16, 256, Role::clean);
    SegmentPool rendered = pool_of(buf, 16, 256, Role::rendered);
    Rng r1(9), r2(9);
    UnpairedBatch a = make_unpaired_batch({&clean}, rendered, 8, r1);
    UnpairedBatch b = make_unpaired_batch({&clean}, rendered, 8, r2);
    REQUIRE(a.clean.data == b.clean.data);
    REQUIRE(a.rendered.data == b.rendered.data);
}

TEST_CASE("unpaired batch: replacement disabled enforces pool size", "[dataset]") {
    auto buf = ramp_buffer(256, 0.0f);
    SegmentPool clean = pool_of(buf, 2, 128, Role::clean);
    SegmentPool rendered = pool_of(buf, 2, 128, Role::rendered);
    Rng rng(1);
    REQUIRE_THROWS_AS(make_unpaired_batch({&clean}, rendered, 4, rng, false), DataError);
    REQUIRE_THROWS_AS(make_unpaired_batch({}, rendered, 1, rng), DataError);
}

TEST_CASE("unpaired batch: merged pools sampled by size (chi-squared)", "[dataset]") {
    auto buf_a = ramp_buffer(300 * 16, 0.25f);   // marker values distinguish pools
    auto buf_b = ramp_buffer(700 * 16, -0.25f);
    SegmentPool pool_a = pool_of(buf_a, 300, 16, Role::clean);
    SegmentPool pool_b = pool_of(buf_b, 700, 16, Role::clean);
    SegmentPool rendered = pool_of(buf_a, 4, 16, Role::rendered);
    Rng rng(1234);
    const int draws = 10000;
    std::int64_t from_a = 0;
    for (int i = 0; i < draws / 10; ++i) {
        UnpairedBatch b = make_unpaired_batch({&pool_a, &pool_b}, rendered, 10, rng);
        for (int j = 0; j < 10; ++j)
            if (b.clean.at(j, 0, 0) > 0.0f) ++from_a;
    }
    const double expect_a = draws * 0.3, expect_b = draws * 0.7;
    const double chi2 = std::pow(from_a - expect_a, 2) / expect_a +
                        std::pow((draws - from_a) - expect_b, 2) / expect_b;
    REQUIRE(chi2 <= 9.0);  // 3-sigma for 1 dof
}

TEST_CASE("paired batch: alignment and error paths", "[dataset]") {
    auto cbuf = ramp_buffer(1024, 0.0f);
    auto rbuf = ramp_buffer(1024, 0.5f);
    PairedDataset paired;
    paired.segment_length = 128;
    for (int i = 0; i < 8; ++i) {
        Segment c, r;
        c.buffer = cbuf;
        r.buffer = rbuf;
        c.offset = r.offset = i * 128;
        c.length = r.length = 128;
        paired.clean.push_back(c);
        paired.rendered.push_back(r);
    }
    Rng rng(2);
    UnpairedBatch b = make_paired_batch(paired, 4, rng);
    for (int i = 0; i < 4; ++i) {
        // Shared source offset: rendered sample = clean sample + 0.5 marker.
        REQUIRE(b.rendered.at(i, 0, 3) == Approx(b.clean.at(i, 0, 3) + 0.5f).margin(1e-6));
    }

    Rng r1(7), r2(7);
    UnpairedBatch x = make_paired_batch(paired, 4, r1);
    UnpairedBatch y = make_paired_batch(paired, 4, r2);
    REQUIRE(x.clean.data == y.clean.data);

    PairedDataset broken;
    REQUIRE_THROWS_AS(make_paired_batch(broken, 1, rng), DataError);

    PairedDataset single;
    single.segment_length = 128;
    single.clean.push_back(paired.clean[0]);
    single.rendered.push_back(paired.rendered[0]);
    UnpairedBatch one = make_paired_batch(single, 1, rng);
    REQUIRE(one.clean.at(0, 0, 0) == paired.clean[0].samples()[0]);
}

TEST_CASE("toy dataset writes paired files and a manifest", "[dataset]") {
    const std::string dir = (fs::temp_directory_path() / "ampgan_toy_ds").string();
    fs::remove_all(dir);
    ToyDataset ds = make_toy_dataset(dir, 99, 4, 1.0);
    auto entries = load_manifest(ds.manifest_path);
    REQUIRE(entries.size() == 8);

    auto splits = std::vector<Split>(entries.size(), Split::train);
    auto sources = load_sources(entries, splits);
    PairedDataset paired = pair_sources(sources, 4096, Split::train, "toy");
    REQUIRE(paired.paired());
    // The rendered side is exactly tanh(5x) of the clean side.
    for (std::size_t i = 0; i < std::min<std::size_t>(paired.size(), 3); ++i)
        for (int t = 0; t < 4096; t += 619)
            REQUIRE(paired.rendered[i].samples()[t] ==
                    Approx(std::tanh(5.0f * paired.clean[i].samples()[t])).margin(1e-5));
}

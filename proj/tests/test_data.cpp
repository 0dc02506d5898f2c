#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstdio>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <set>

#include "mrfc/data.hpp"
#include "mrfc/rng.hpp"

using namespace mrfc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("mrfc_data_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string write_temp(const TempDir& dir, const std::string& name, const std::string& content) {
    std::string p = dir.file(name);
    std::ofstream out(p);
    out << content;
    return p;
}

}  // namespace

TEST_CASE("load_csv reads a handcrafted fixture") {
    TempDir dir;
    std::string p = write_temp(dir, "a.csv",
                               "x1,x2,Class\n"
                               "1.5,-2,0\n"
                               "0.25,3.5,1\n"
                               "-1,0,0\n");
    RawDataset ds = load_csv(p);
    CHECK(ds.size() == 3);
    CHECK(ds.dim() == 2);
    CHECK(ds.feature_names == std::vector<std::string>{"x1", "x2"});
    CHECK(ds.features[1][1] == 3.5);
    CHECK(ds.labels == std::vector<int>{0, 1, 0});
}

TEST_CASE("load_csv errors name the problem") {
    TempDir dir;
    CHECK_THROWS_AS(load_csv(write_temp(dir, "b.csv", "x1,x2\n1,2\n")), SchemaError);
    CHECK_THROWS_AS(load_csv(write_temp(dir, "c.csv", "x1,Class\nfoo,0\n")), ParseError);
    CHECK_THROWS_AS(load_csv(write_temp(dir, "d.csv", "x1,Class\n1,2\n")), ParseError);
    CHECK_THROWS_AS(load_csv(dir.file("missing.csv")), Error);
}

TEST_CASE("creditcard loader resolves columns by name") {
    TempDir dir;
    // shuffled column order, minimal synthetic header matching the schema
    std::string header = "Class,Amount,Time";
    for (int i = 28; i >= 1; --i) header += ",V" + std::to_string(i);
    std::string row1 = "0,10.5,1";
    std::string row2 = "1,99,2";
    for (int i = 28; i >= 1; --i) {
        row1 += "," + std::to_string(i);
        row2 += "," + std::to_string(-i);
    }
    std::string p = write_temp(dir, "cc.csv", header + "\n" + row1 + "\n" + row2 + "\n");
    RawDataset ds = load_creditcard_csv(p);
    CHECK(ds.size() == 2);
    CHECK(ds.dim() == 30);
    CHECK(ds.feature_names[0] == "Time");
    CHECK(ds.feature_names[1] == "V1");
    CHECK(ds.feature_names[29] == "Amount");
    CHECK(ds.features[0][0] == 1.0);    // Time
    CHECK(ds.features[0][1] == 1.0);    // V1
    CHECK(ds.features[0][29] == 10.5);  // Amount
    CHECK(ds.labels == std::vector<int>{0, 1});
}

TEST_CASE("creditcard loader rejects missing or extra columns") {
    TempDir dir;
    std::string header = "Time";
    for (int i = 1; i <= 27; ++i) header += ",V" + std::to_string(i);
    header += ",Amount,Class";
    CHECK_THROWS_WITH_AS(load_creditcard_csv(write_temp(dir, "e.csv", header + "\n")),
                         doctest::Contains("V28"), SchemaError);

    std::string full = "Time";
    for (int i = 1; i <= 28; ++i) full += ",V" + std::to_string(i);
    full += ",Amount,Class,Extra";
    CHECK_THROWS_AS(load_creditcard_csv(write_temp(dir, "f.csv", full + "\n")), SchemaError);
}

TEST_CASE("bin fitting on the worked 4-value case") {
    RawDataset ds;
    ds.feature_names = {"x1"};
    ds.features = {{1}, {2}, {3}, {4}};
    ds.labels = {0, 1, 0, 1};
    BinningSpec spec = fit_bins(ds, 2);
    REQUIRE(spec.cuts[0].size() == 1);
    CHECK(spec.cuts[0][0] == doctest::Approx(2.5));
    DiscretizedDataset binned = apply_bins(ds, spec);
    CHECK(binned.instances[0][0] == 0);
    CHECK(binned.instances[1][0] == 0);
    CHECK(binned.instances[2][0] == 1);
    CHECK(binned.instances[3][0] == 1);
}

TEST_CASE("constant columns flag a warning and bin to zero") {
    RawDataset ds;
    ds.feature_names = {"x1", "x2"};
    ds.features = {{7, 1}, {7, 2}, {7, 3}};
    ds.labels = {0, 1, 0};
    BinningSpec spec = fit_bins(ds, 3);
    CHECK(spec.constant[0]);
    CHECK_FALSE(spec.constant[1]);
    CHECK(spec.any_constant());
    CHECK(spec.cardinality(0) == 1);
    DiscretizedDataset binned = apply_bins(ds, spec);
    for (const auto& row : binned.instances) CHECK(row[0] == 0);
}

TEST_CASE("out-of-range values clamp to edge bins") {
    RawDataset train;
    train.feature_names = {"x1"};
    train.features = {{1}, {2}, {3}, {4}, {5}};
    train.labels = {0, 0, 1, 1, 0};
    BinningSpec spec = fit_bins(train, 5);
    RawDataset test;
    test.feature_names = {"x1"};
    test.features = {{-100}, {100}};
    test.labels = {0, 1};
    DiscretizedDataset binned = apply_bins(test, spec);
    CHECK(binned.instances[0][0] == 0);
    CHECK(binned.instances[1][0] == static_cast<int>(spec.cuts[0].size()));
}

TEST_CASE("binning never leaks test rows") {
    Rng rng(5);
    RawDataset ds;
    ds.feature_names = {"x1", "x2"};
    for (int i = 0; i < 50; ++i) {
        ds.features.push_back({rng.next_normal(), rng.next_normal()});
        ds.labels.push_back(i % 5 == 0 ? 1 : 0);
    }
    std::vector<int> train_rows;
    for (int i = 0; i < 30; ++i) train_rows.push_back(i);
    BinningSpec a = fit_bins(ds, 4, &train_rows);
    RawDataset perturbed = ds;
    for (int i = 30; i < 50; ++i) {
        for (auto& v : perturbed.features[static_cast<std::size_t>(i)]) v += 1000.0;
    }
    BinningSpec b = fit_bins(perturbed, 4, &train_rows);
    CHECK(a.cuts == b.cuts);
}

TEST_CASE("bins spec round-trips through its sidecar document") {
    RawDataset ds;
    ds.feature_names = {"x1", "x2"};
    ds.features = {{1, 7}, {2, 7}, {3, 7}};
    ds.labels = {0, 1, 0};
    BinningSpec spec = fit_bins(ds, 3);
    BinningSpec back = deserialize_bins(serialize_bins(spec));
    CHECK(back.cuts == spec.cuts);
    CHECK(back.bins == spec.bins);
    CHECK(back.feature_names == spec.feature_names);
    CHECK(back.constant == spec.constant);
    CHECK_THROWS_AS(deserialize_bins("{"), ParseError);
}

TEST_CASE("stratified split on the worked 90/10 case") {
    std::vector<int> labels(90, 0);
    labels.insert(labels.end(), 10, 1);
    SplitIndices split = stratified_split(labels, 0.2, 42);
    int test_major = 0, test_minor = 0;
    for (int i : split.test) (labels[static_cast<std::size_t>(i)] == 0 ? test_major : test_minor)++;
    CHECK(test_major == 18);
    CHECK(test_minor == 2);
    CHECK(split.train.size() + split.test.size() == 100);

    std::set<int> all(split.train.begin(), split.train.end());
    all.insert(split.test.begin(), split.test.end());
    CHECK(all.size() == 100);
}

TEST_CASE("stratified split determinism and balance") {
    std::vector<int> labels;
    for (int i = 0; i < 40; ++i) labels.push_back(i % 2);
    SplitIndices a = stratified_split(labels, 0.5, 7);
    SplitIndices b = stratified_split(labels, 0.5, 7);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    SplitIndices c = stratified_split(labels, 0.5, 8);
    CHECK(a.test != c.test);

    int pos = 0;
    for (int i : a.test) pos += labels[static_cast<std::size_t>(i)];
    CHECK(pos == 10);
}

TEST_CASE("stratified split errors when a class is too small") {
    std::vector<int> labels(10, 0);
    labels[0] = 1;
    CHECK_THROWS_AS(stratified_split(labels, 0.5, 1), StratificationError);
}

TEST_CASE("split files round-trip") {
    TempDir dir;
    std::vector<int> labels;
    for (int i = 0; i < 20; ++i) labels.push_back(i % 4 == 0);
    SplitIndices split = stratified_split(labels, 0.3, 11);
    std::string p = dir.file("split.txt");
    write_split(p, split);
    SplitIndices back = read_split(p);
    CHECK(back.train == split.train);
    CHECK(back.test == split.test);
}

TEST_CASE("resampling hits the expected counts at fraud-dataset scale") {
    std::vector<int> labels(284315, 0);
    labels.insert(labels.end(), 492, 1);
    std::vector<int> at10 = resample_indices_to_minority_ratio(labels, 0.10, 1);
    long long majors = 0, minors = 0;
    for (int i : at10) (labels[static_cast<std::size_t>(i)] == 0 ? majors : minors)++;
    CHECK(minors == 492);
    CHECK(majors == 4428);

    std::vector<int> at30 = resample_indices_to_minority_ratio(labels, 0.30, 1);
    majors = 0;
    for (int i : at30) majors += (labels[static_cast<std::size_t>(i)] == 0);
    CHECK(majors == 1148);
}

TEST_CASE("resampling keeps every minority instance and respects feasibility") {
    std::vector<int> labels(50, 0);
    for (int i = 0; i < 10; ++i) labels[static_cast<std::size_t>(i) * 5] = 1;
    std::vector<int> kept = resample_indices_to_minority_ratio(labels, 0.5, 3);
    std::set<int> kept_set(kept.begin(), kept.end());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1) CHECK(kept_set.count(static_cast<int>(i)) == 1);
    }
    CHECK_THROWS_AS(resample_indices_to_minority_ratio(labels, 0.05, 3), InfeasibleRatioError);

    // ratio at the native value keeps the majority nearly intact
    std::vector<int> same = resample_indices_to_minority_ratio(labels, 0.2, 3);
    CHECK(std::abs(static_cast<int>(same.size()) - 50) <= 1);
}

TEST_CASE("synthetic generation hits the requested minority count") {
    SyntheticConfig cfg;
    cfg.n = 100;
    cfg.d = 4;
    cfg.minority_ratio = 0.1;
    cfg.planted = Planted::xor_pair;
    cfg.noise = 0.05;
    cfg.seed = 2;
    RawDataset ds = generate_synthetic(cfg);
    CHECK(ds.size() == 100);
    CHECK(ds.dim() == 4);
    int minors = 0;
    for (int y : ds.labels) minors += y;
    CHECK(std::abs(minors - 10) <= 1);
}

TEST_CASE("synthetic generation is deterministic per seed") {
    SyntheticConfig cfg;
    cfg.n = 50;
    cfg.d = 3;
    cfg.seed = 9;
    RawDataset a = generate_synthetic(cfg);
    RawDataset b = generate_synthetic(cfg);
    CHECK(a.features == b.features);
    CHECK(a.labels == b.labels);
    cfg.seed = 10;
    RawDataset c = generate_synthetic(cfg);
    CHECK(a.features != c.features);
}

TEST_CASE("synthetic config validation") {
    SyntheticConfig cfg;
    cfg.n = 5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = SyntheticConfig{};
    cfg.d = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = SyntheticConfig{};
    cfg.minority_ratio = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("csv round-trip preserves values exactly") {
    TempDir dir;
    SyntheticConfig cfg;
    cfg.n = 30;
    cfg.d = 3;
    cfg.seed = 4;
    RawDataset ds = generate_synthetic(cfg);
    std::string p = dir.file("round.csv");
    write_csv(p, ds);
    RawDataset back = load_csv(p);
    CHECK(back.features == ds.features);
    CHECK(back.labels == ds.labels);
    CHECK(back.feature_names == ds.feature_names);
}

TEST_CASE("binned values keep their within-feature ordering") {
    Rng rng(31);
    RawDataset ds;
    ds.feature_names = {"x1"};
    for (int i = 0; i < 200; ++i) {
        ds.features.push_back({rng.next_normal()});
        ds.labels.push_back(i % 10 == 0);
    }
    BinningSpec spec = fit_bins(ds, 5);
    DiscretizedDataset binned = apply_bins(ds, spec);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t j = 0; j < ds.size(); ++j) {
            if (ds.features[i][0] < ds.features[j][0]) {
                CHECK(binned.instances[i][0] <= binned.instances[j][0]);
            }
        }
    }
}

TEST_CASE("subset selects rows in order") {
    RawDataset ds;
    ds.feature_names = {"x1"};
    ds.features = {{1}, {2}, {3}, {4}};
    ds.labels = {0, 1, 0, 1};
    RawDataset sub = subset(ds, {3, 1});
    CHECK(sub.features == std::vector<std::vector<double>>{{4}, {2}});
    CHECK(sub.labels == std::vector<int>{1, 1});
}

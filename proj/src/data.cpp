#include "mrfc/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "mrfc/rng.hpp"

namespace mrfc {

bool BinningSpec::any_constant() const {
    for (bool c : constant) {
        if (c) return true;
    }
    return false;
}

namespace {

std::string strip(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n')) --e;
    std::string out = s.substr(b, e - b);
    if (out.size() >= 2 && out.front() == '"' && out.back() == '"') {
        out = out.substr(1, out.size() - 2);
    }
    return out;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(strip(cell));
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& column) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0') {
        throw ParseError("non-numeric cell '" + cell + "' in column " + column + " at row " +
                         std::to_string(row));
    }
    if (!std::isfinite(v)) {
        throw ParseError("non-finite value in column " + column + " at row " + std::to_string(row));
    }
    return v;
}

// Loads a CSV whose columns are resolved by header name. `required_order`,
// when nonempty, both validates the column set and fixes the feature order.
RawDataset load_named_csv(const std::string& path, const std::vector<std::string>& required_order,
                          bool class_required = true) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw SchemaError("empty file: " + path);
    std::vector<std::string> header = split_line(line);

    int class_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "Class") class_col = static_cast<int>(i);
    }
    if (class_col < 0 && class_required) throw SchemaError("missing required column: Class");

    std::vector<std::string> names;
    std::vector<int> cols;  // source column per output feature
    if (!required_order.empty()) {
        for (const std::string& want : required_order) {
            int found = -1;
            for (std::size_t i = 0; i < header.size(); ++i) {
                if (header[i] == want) found = static_cast<int>(i);
            }
            if (found < 0) throw SchemaError("missing required column: " + want);
            names.push_back(want);
            cols.push_back(found);
        }
        if (header.size() != required_order.size() + 1) {
            throw SchemaError("unexpected extra columns in header");
        }
    } else {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (static_cast<int>(i) == class_col) continue;
            if (header[i].empty()) throw SchemaError("empty column name in header");
            names.push_back(header[i]);
            cols.push_back(static_cast<int>(i));
        }
        if (names.empty()) throw SchemaError("no feature columns besides Class");
    }

    RawDataset data;
    data.feature_names = names;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (strip(line).empty()) continue;
        std::vector<std::string> cells = split_line(line);
        if (cells.size() != header.size()) {
            throw ParseError("row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                             " cells, header has " + std::to_string(header.size()));
        }
        std::vector<double> feats(names.size());
        for (std::size_t j = 0; j < names.size(); ++j) {
            feats[j] = parse_cell(cells[static_cast<std::size_t>(cols[j])], row, names[j]);
        }
        int label = 0;
        if (class_col >= 0) {
            double cls = parse_cell(cells[static_cast<std::size_t>(class_col)], row, "Class");
            if (cls != 0.0 && cls != 1.0) {
                throw ParseError("Class must be 0 or 1 at row " + std::to_string(row));
            }
            label = static_cast<int>(cls);
        }
        data.features.push_back(std::move(feats));
        data.labels.push_back(label);
    }
    if (data.features.empty()) {
        // Header-only files are allowed (an empty prediction input, for one).
        return data;
    }
    return data;
}

}  // namespace

RawDataset load_creditcard_csv(const std::string& path) {
    std::vector<std::string> order;
    order.push_back("Time");
    for (int i = 1; i <= 28; ++i) order.push_back("V" + std::to_string(i));
    order.push_back("Amount");
    return load_named_csv(path, order);
}

RawDataset load_csv(const std::string& path) {
    return load_named_csv(path, {});
}

RawDataset load_feature_csv(const std::string& path) {
    return load_named_csv(path, {}, /*class_required=*/false);
}

namespace {

std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace

void write_csv(const std::string& path, const RawDataset& data) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write file: " + path);
    for (std::size_t j = 0; j < data.feature_names.size(); ++j) {
        out << data.feature_names[j] << ',';
    }
    out << "Class\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (std::size_t j = 0; j < data.feature_names.size(); ++j) {
            out << fmt_double(data.features[i][j]) << ',';
        }
        out << data.labels[i] << '\n';
    }
}

BinningSpec fit_bins(const RawDataset& data, int k, const std::vector<int>* rows) {
    if (k < 2) throw ConfigError("bin count must be >= 2");
    if (data.size() == 0) throw Error("cannot fit bins on an empty dataset");

    BinningSpec spec;
    spec.bins = k;
    spec.feature_names = data.feature_names;
    spec.cuts.resize(data.dim());
    spec.constant.assign(data.dim(), false);

    std::vector<double> values;
    for (std::size_t j = 0; j < data.dim(); ++j) {
        values.clear();
        if (rows) {
            for (int r : *rows) values.push_back(data.features[static_cast<std::size_t>(r)][j]);
        } else {
            for (std::size_t r = 0; r < data.size(); ++r) values.push_back(data.features[r][j]);
        }
        std::sort(values.begin(), values.end());
        double lo = values.front(), hi = values.back();
        if (lo == hi) {
            spec.constant[j] = true;
            continue;  // zero cuts: single-bin feature
        }
        std::vector<double>& cuts = spec.cuts[j];
        std::size_t n = values.size();
        for (int q = 1; q < k; ++q) {
            double h = static_cast<double>(n - 1) * static_cast<double>(q) / static_cast<double>(k);
            std::size_t base = static_cast<std::size_t>(h);
            double frac = h - static_cast<double>(base);
            double cut = values[base];
            if (base + 1 < n) cut += frac * (values[base + 1] - values[base]);
            // Drop degenerate cuts: duplicates and cuts at or below the
            // minimum would create permanently empty bins.
            if (cut <= lo) continue;
            if (!cuts.empty() && cut <= cuts.back()) continue;
            cuts.push_back(cut);
        }
        if (cuts.empty()) spec.constant[j] = true;
    }
    return spec;
}

DiscretizedDataset apply_bins(const RawDataset& data, const BinningSpec& spec) {
    if (data.feature_names != spec.feature_names) {
        throw SchemaError("feature names do not match the binning spec");
    }
    DiscretizedDataset out;
    out.spec = spec;
    out.labels = data.labels;
    out.instances.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::vector<int>& row = out.instances[i];
        row.resize(data.dim());
        for (std::size_t j = 0; j < data.dim(); ++j) {
            const std::vector<double>& cuts = spec.cuts[j];
            // number of cuts <= value; out-of-range values clamp to edge bins
            row[j] = static_cast<int>(
                std::upper_bound(cuts.begin(), cuts.end(), data.features[i][j]) - cuts.begin());
        }
    }
    return out;
}

std::string serialize_bins(const BinningSpec& spec) {
    std::string out;
    out += "{\n  \"format_version\": 1,\n  \"bins\": " + std::to_string(spec.bins) + ",\n";
    out += "  \"feature_names\": [";
    for (std::size_t j = 0; j < spec.feature_names.size(); ++j) {
        if (j) out += ", ";
        out += "\"" + spec.feature_names[j] + "\"";
    }
    out += "],\n  \"constant\": [";
    for (std::size_t j = 0; j < spec.constant.size(); ++j) {
        if (j) out += ", ";
        out += spec.constant[j] ? "true" : "false";
    }
    out += "],\n  \"cuts\": [\n";
    for (std::size_t j = 0; j < spec.cuts.size(); ++j) {
        out += "    [";
        for (std::size_t i = 0; i < spec.cuts[j].size(); ++i) {
            if (i) out += ", ";
            out += fmt_double(spec.cuts[j][i]);
        }
        out += "]";
        out += (j + 1 < spec.cuts.size()) ? ",\n" : "\n";
    }
    out += "  ]\n}\n";
    return out;
}

BinningSpec deserialize_bins(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bins document is not valid: ") + e.what());
    }
    try {
        BinningSpec spec;
        if (!doc.contains("format_version") || doc["format_version"].get<int>() != 1) {
            throw ParseError("field 'format_version' must be the integer 1");
        }
        if (!doc.contains("bins")) throw ParseError("missing field 'bins'");
        spec.bins = doc["bins"].get<int>();
        if (!doc.contains("feature_names")) throw ParseError("missing field 'feature_names'");
        spec.feature_names = doc["feature_names"].get<std::vector<std::string>>();
        if (!doc.contains("cuts")) throw ParseError("missing field 'cuts'");
        spec.cuts = doc["cuts"].get<std::vector<std::vector<double>>>();
        if (doc.contains("constant")) {
            spec.constant = doc["constant"].get<std::vector<bool>>();
        } else {
            spec.constant.assign(spec.cuts.size(), false);
        }
        if (spec.cuts.size() != spec.feature_names.size() ||
            spec.constant.size() != spec.feature_names.size()) {
            throw ParseError("field 'cuts' shape does not match 'feature_names'");
        }
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bins document field has wrong type: ") + e.what());
    }
}

SplitIndices stratified_split(const std::vector<int>& labels, double test_frac,
                              std::uint64_t seed) {
    if (test_frac <= 0.0 || test_frac >= 1.0) {
        throw ConfigError("test_frac must be in (0, 1)");
    }
    std::vector<int> idx_by_class[2];
    for (std::size_t i = 0; i < labels.size(); ++i) {
        int y = labels[i];
        if (y != 0 && y != 1) throw Error("labels must be 0 or 1");
        idx_by_class[y].push_back(static_cast<int>(i));
    }
    SplitIndices split;
    split.seed = seed;
    for (int c = 0; c < 2; ++c) {
        std::vector<int>& idx = idx_by_class[c];
        if (idx.size() < 2) {
            throw StratificationError("class " + std::to_string(c) +
                                      " has fewer than 2 instances; cannot stratify");
        }
        long long n_test = std::llround(test_frac * static_cast<double>(idx.size()));
        n_test = std::clamp<long long>(n_test, 1, static_cast<long long>(idx.size()) - 1);
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
        rng.shuffle(idx);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            if (i < static_cast<std::size_t>(n_test)) {
                split.test.push_back(idx[i]);
            } else {
                split.train.push_back(idx[i]);
            }
        }
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

void write_split(const std::string& path, const SplitIndices& split) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write file: " + path);
    out << "[train]\n";
    for (int i : split.train) out << i << '\n';
    out << "[test]\n";
    for (int i : split.test) out << i << '\n';
}

SplitIndices read_split(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open file: " + path);
    SplitIndices split;
    std::vector<int>* current = nullptr;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        std::string t = strip(line);
        if (t.empty()) continue;
        if (t == "[train]") {
            current = &split.train;
        } else if (t == "[test]") {
            current = &split.test;
        } else {
            if (!current) throw ParseError("index before section header at line " + std::to_string(row));
            current->push_back(static_cast<int>(parse_cell(t, row, "index")));
        }
    }
    return split;
}

std::vector<int> resample_indices_to_minority_ratio(const std::vector<int>& labels,
                                                    double ratio, std::uint64_t seed) {
    if (ratio <= 0.0 || ratio >= 1.0) throw ConfigError("minority ratio must be in (0, 1)");
    std::vector<int> minority, majority;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        (labels[i] == 1 ? minority : majority).push_back(static_cast<int>(i));
    }
    if (minority.size() > majority.size()) std::swap(minority, majority);
    if (minority.empty()) throw DegenerateClassError("dataset has a class with zero instances");

    long long n_min = static_cast<long long>(minority.size());
    long long target_total = std::llround(static_cast<double>(n_min) / ratio);
    long long target_major = target_total - n_min;
    if (target_major > static_cast<long long>(majority.size()) || target_major < 1) {
        double lo = static_cast<double>(n_min) / static_cast<double>(n_min + static_cast<long long>(majority.size()));
        double hi = static_cast<double>(n_min) / static_cast<double>(n_min + 1);
        throw InfeasibleRatioError("ratio " + std::to_string(ratio) +
                                   " not achievable by majority undersampling; achievable range is [" +
                                   std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }

    Rng rng(seed);
    rng.shuffle(majority);
    std::vector<int> keep(minority);
    keep.insert(keep.end(), majority.begin(), majority.begin() + target_major);
    std::sort(keep.begin(), keep.end());
    return keep;
}

DiscretizedDataset resample_to_minority_ratio(const DiscretizedDataset& data, double ratio,
                                              std::uint64_t seed) {
    std::vector<int> keep = resample_indices_to_minority_ratio(data.labels, ratio, seed);
    return subset(data, keep);
}

void SyntheticConfig::validate() const {
    if (n < 10) throw ConfigError("synthetic n must be >= 10");
    if (d < 2) throw ConfigError("synthetic d must be >= 2");
    if (minority_ratio <= 0.0 || minority_ratio >= 1.0) {
        throw ConfigError("synthetic minority_ratio must be in (0, 1)");
    }
    if (noise < 0.0 || noise > 1.0) throw ConfigError("synthetic noise must be in [0, 1]");
}

RawDataset generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);

    RawDataset data;
    for (int j = 0; j < cfg.d; ++j) data.feature_names.push_back("x" + std::to_string(j + 1));

    // Labels first, placed to hit the minority count exactly.
    long long n_minority = std::llround(cfg.minority_ratio * static_cast<double>(cfg.n));
    std::vector<int> order(static_cast<std::size_t>(cfg.n));
    for (int i = 0; i < cfg.n; ++i) order[static_cast<std::size_t>(i)] = i;
    rng.shuffle(order);
    data.labels.assign(static_cast<std::size_t>(cfg.n), 0);
    for (long long i = 0; i < n_minority; ++i) {
        data.labels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1;
    }

    // Hidden bit s = [|v| > 0.5]. Inner cluster |v| < 0.25, outer cluster
    // |v| > 1, with a density gap between them so quantile cuts recover the
    // bit cleanly. Signs are drawn independently, keeping the raw marginal
    // sign-symmetric: any linear score on the raw values has the same
    // distribution for both classes, so a linear model stays at chance.
    auto draw_magnitude_bit = [&](bool outer) {
        double mag = outer ? 1.0 + std::abs(rng.next_normal()) : 0.25 * rng.next_double();
        return rng.next_double() < 0.5 ? -mag : mag;
    };

    data.features.resize(static_cast<std::size_t>(cfg.n));
    for (int i = 0; i < cfg.n; ++i) {
        std::vector<double>& row = data.features[static_cast<std::size_t>(i)];
        row.resize(static_cast<std::size_t>(cfg.d));
        int y = data.labels[static_cast<std::size_t>(i)];
        switch (cfg.planted) {
            case Planted::none: {
                for (int j = 0; j < cfg.d; ++j) row[static_cast<std::size_t>(j)] = rng.next_normal();
                break;
            }
            case Planted::xor_pair: {
                int target = y ^ (rng.next_double() < cfg.noise ? 1 : 0);
                bool s0 = rng.next_double() < 0.9;
                bool s1 = s0 ^ (target == 1);
                row[0] = draw_magnitude_bit(s0);
                row[1] = draw_magnitude_bit(s1);
                for (int j = 2; j < cfg.d; ++j) row[static_cast<std::size_t>(j)] = rng.next_normal();
                break;
            }
            case Planted::pairwise: {
                int effective = y ^ (rng.next_double() < cfg.noise ? 1 : 0);
                double shift = effective == 1 ? 1.5 : 0.0;
                row[0] = rng.next_normal() + shift;
                row[1] = rng.next_normal() + shift;
                for (int j = 2; j < cfg.d; ++j) row[static_cast<std::size_t>(j)] = rng.next_normal();
                break;
            }
        }
    }
    return data;
}

RawDataset subset(const RawDataset& data, const std::vector<int>& rows) {
    RawDataset out;
    out.feature_names = data.feature_names;
    out.features.reserve(rows.size());
    out.labels.reserve(rows.size());
    for (int r : rows) {
        out.features.push_back(data.features[static_cast<std::size_t>(r)]);
        out.labels.push_back(data.labels[static_cast<std::size_t>(r)]);
    }
    return out;
}

DiscretizedDataset subset(const DiscretizedDataset& data, const std::vector<int>& rows) {
    DiscretizedDataset out;
    out.spec = data.spec;
    out.instances.reserve(rows.size());
    out.labels.reserve(rows.size());
    for (int r : rows) {
        out.instances.push_back(data.instances[static_cast<std::size_t>(r)]);
        out.labels.push_back(data.labels[static_cast<std::size_t>(r)]);
    }
    if (data.weights) {
        SampleWeights w;
        for (int r : rows) w.weights.push_back(data.weights->weights[static_cast<std::size_t>(r)]);
        out.weights = std::move(w);
    }
    return out;
}

}  // namespace mrfc

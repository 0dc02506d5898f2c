#include "mrfc/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace mrfc {

void GraphStructure::validate() const {
    if (variables.empty()) throw Error("structure has no variables");
    int labels_seen = 0;
    for (std::size_t i = 0; i < variables.size(); ++i) {
        const VariableSpec& v = variables[i];
        if (v.id != static_cast<int>(i)) {
            throw Error("variable ids must be contiguous 0..n-1; slot " + std::to_string(i) +
                        " holds id " + std::to_string(v.id));
        }
        if (v.cardinality < 2) {
            throw Error("variable " + v.name + " has cardinality " +
                        std::to_string(v.cardinality) + " (minimum 2)");
        }
        if (v.role == VarRole::label) ++labels_seen;
    }
    if (labels_seen != 1) {
        throw Error("exactly one label variable required, found " + std::to_string(labels_seen));
    }
    int n = static_cast<int>(variables.size());
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const Edge& e = edges[i];
        if (e.u < 0 || e.v >= n) throw Error("edge endpoint out of range");
        if (e.u >= e.v) throw Error("edges must satisfy u < v (no self-loops)");
        if (i > 0 && !(edges[i - 1] < e)) throw Error("edges must be sorted and unique");
    }
}

int GraphStructure::label_id() const {
    for (const VariableSpec& v : variables) {
        if (v.role == VarRole::label) return v.id;
    }
    throw Error("structure has no label variable");
}

LogLinearParams zero_params(const GraphStructure& structure) {
    LogLinearParams p;
    p.unary.reserve(structure.variables.size());
    for (const VariableSpec& v : structure.variables) {
        p.unary.emplace_back(static_cast<std::size_t>(v.cardinality), 0.0);
    }
    p.pairwise.reserve(structure.edges.size());
    for (const Edge& e : structure.edges) {
        std::size_t cu = static_cast<std::size_t>(structure.variables[static_cast<std::size_t>(e.u)].cardinality);
        std::size_t cv = static_cast<std::size_t>(structure.variables[static_cast<std::size_t>(e.v)].cardinality);
        p.pairwise.emplace_back(cu * cv, 0.0);
    }
    return p;
}

namespace {

void check_param_shapes(const GraphStructure& s, const LogLinearParams& p) {
    if (p.unary.size() != s.variables.size()) {
        throw Error("unary table count does not match variable count");
    }
    for (std::size_t i = 0; i < s.variables.size(); ++i) {
        if (p.unary[i].size() != static_cast<std::size_t>(s.variables[i].cardinality)) {
            throw Error("unary table shape mismatch at variable " + std::to_string(i));
        }
        for (double t : p.unary[i]) {
            if (!std::isfinite(t)) throw Error("non-finite unary parameter at variable " + std::to_string(i));
        }
    }
    if (p.pairwise.size() != s.edges.size()) {
        throw Error("pairwise table count does not match edge count");
    }
    for (std::size_t i = 0; i < s.edges.size(); ++i) {
        const Edge& e = s.edges[i];
        std::size_t want = static_cast<std::size_t>(s.variables[static_cast<std::size_t>(e.u)].cardinality) *
                           static_cast<std::size_t>(s.variables[static_cast<std::size_t>(e.v)].cardinality);
        if (p.pairwise[i].size() != want) {
            throw Error("pairwise table shape mismatch at edge " + std::to_string(i));
        }
        for (double t : p.pairwise[i]) {
            if (!std::isfinite(t)) throw Error("non-finite pairwise parameter at edge " + std::to_string(i));
        }
    }
}

}  // namespace

MarkovNetwork::MarkovNetwork(GraphStructure structure, LogLinearParams params)
    : structure_(std::move(structure)), params_(std::move(params)) {
    structure_.validate();
    check_param_shapes(structure_, params_);
    adjacency_.assign(structure_.variables.size(), {});
    for (std::size_t i = 0; i < structure_.edges.size(); ++i) {
        const Edge& e = structure_.edges[i];
        adjacency_[static_cast<std::size_t>(e.u)].push_back({e.v, static_cast<int>(i)});
        adjacency_[static_cast<std::size_t>(e.v)].push_back({e.u, static_cast<int>(i)});
    }
}

MarkovNetwork MarkovNetwork::zeros(GraphStructure structure) {
    LogLinearParams p = zero_params(structure);
    return MarkovNetwork(std::move(structure), std::move(p));
}

std::uint64_t joint_state_count(const GraphStructure& structure, std::uint64_t cap) {
    std::uint64_t total = 1;
    for (const VariableSpec& v : structure.variables) {
        total *= static_cast<std::uint64_t>(v.cardinality);
        if (total > cap) return cap + 1;
    }
    return total;
}

double log_score(const MarkovNetwork& network, const Assignment& a) {
    const GraphStructure& s = network.structure();
    if (a.size() != s.variables.size()) {
        throw InvalidAssignmentError("assignment length " + std::to_string(a.size()) +
                                     " does not match variable count " +
                                     std::to_string(s.variables.size()));
    }
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        int st = a[i];
        if (st < 0 || st >= s.variables[i].cardinality) {
            throw InvalidAssignmentError("state " + std::to_string(st) +
                                         " out of range for variable " + std::to_string(i));
        }
        total += network.params().unary[i][static_cast<std::size_t>(st)];
    }
    for (std::size_t e = 0; e < s.edges.size(); ++e) {
        const Edge& ed = s.edges[e];
        int cv = s.variables[static_cast<std::size_t>(ed.v)].cardinality;
        total += network.params().pairwise[e]
            [static_cast<std::size_t>(a[static_cast<std::size_t>(ed.u)] * cv +
                                      a[static_cast<std::size_t>(ed.v)])];
    }
    return total;
}

namespace {

// Odometer enumeration over all joint assignments; fn(a) per assignment.
template <typename Fn>
void for_each_assignment(const GraphStructure& s, Fn&& fn) {
    std::size_t n = s.variables.size();
    Assignment a(n, 0);
    while (true) {
        fn(a);
        std::size_t i = n;
        while (i > 0) {
            --i;
            if (++a[i] < s.variables[i].cardinality) break;
            a[i] = 0;
            if (i == 0) return;
        }
    }
}

}  // namespace

double log_partition_exact(const MarkovNetwork& network, std::uint64_t state_limit) {
    const GraphStructure& s = network.structure();
    if (joint_state_count(s, state_limit) > state_limit) {
        throw TooLargeError("joint state space exceeds exact limit of " +
                            std::to_string(state_limit) + " states");
    }
    // Streaming log-sum-exp with a running maximum.
    double m = -std::numeric_limits<double>::infinity();
    double acc = 0.0;
    for_each_assignment(s, [&](const Assignment& a) {
        double ls = log_score(network, a);
        if (ls <= m) {
            acc += std::exp(ls - m);
        } else {
            acc = acc * std::exp(m - ls) + 1.0;
            m = ls;
        }
    });
    return m + std::log(acc);
}

double partition_function_exact(const MarkovNetwork& network, std::uint64_t state_limit) {
    return std::exp(log_partition_exact(network, state_limit));
}

double joint_probability(const MarkovNetwork& network, const Assignment& a,
                         std::uint64_t state_limit) {
    double lz = log_partition_exact(network, state_limit);
    return std::exp(log_score(network, a) - lz);
}

namespace {

std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::string json_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') {
            out += '\\';
            out += c;
        } else if (static_cast<unsigned char>(c) < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof(buf), "\\u%04x", c);
            out += buf;
        } else {
            out += c;
        }
    }
    return out;
}

void append_array(std::string& out, const std::vector<double>& v) {
    out += '[';
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += fmt_double(v[i]);
    }
    out += ']';
}

}  // namespace

std::string serialize_model(const MarkovNetwork& network) {
    // Emitted by hand so the byte layout and the 17-significant-digit decimal
    // rendering are stable across standard-library versions.
    const GraphStructure& s = network.structure();
    std::string out;
    out += "{\n  \"format_version\": 1,\n  \"variables\": [\n";
    for (std::size_t i = 0; i < s.variables.size(); ++i) {
        const VariableSpec& v = s.variables[i];
        out += "    {\"id\": " + std::to_string(v.id) + ", \"name\": \"" + json_escape(v.name) +
               "\", \"cardinality\": " + std::to_string(v.cardinality) + ", \"role\": \"" +
               (v.role == VarRole::label ? "label" : "feature") + "\"}";
        out += (i + 1 < s.variables.size()) ? ",\n" : "\n";
    }
    out += "  ],\n  \"edges\": [";
    for (std::size_t i = 0; i < s.edges.size(); ++i) {
        if (i) out += ", ";
        out += "[" + std::to_string(s.edges[i].u) + ", " + std::to_string(s.edges[i].v) + "]";
    }
    out += "],\n  \"unary\": {\n";
    for (std::size_t i = 0; i < s.variables.size(); ++i) {
        out += "    \"" + std::to_string(i) + "\": ";
        append_array(out, network.params().unary[i]);
        out += (i + 1 < s.variables.size()) ? ",\n" : "\n";
    }
    out += "  },\n  \"pairwise\": {\n";
    for (std::size_t i = 0; i < s.edges.size(); ++i) {
        out += "    \"" + std::to_string(s.edges[i].u) + "-" + std::to_string(s.edges[i].v) + "\": ";
        append_array(out, network.params().pairwise[i]);
        out += (i + 1 < s.edges.size()) ? ",\n" : "\n";
    }
    out += "  }\n}\n";
    return out;
}

namespace {

using nlohmann::json;

const json& require_field(const json& doc, const char* name) {
    auto it = doc.find(name);
    if (it == doc.end()) throw ParseError(std::string("missing field '") + name + "'");
    return *it;
}

}  // namespace

MarkovNetwork deserialize_model(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("model document is not valid: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("model document root must be an object");

    try {
        const json& ver = require_field(doc, "format_version");
        if (!ver.is_number_integer() || ver.get<int>() != 1) {
            throw ParseError("field 'format_version' must be the integer 1");
        }

        GraphStructure s;
        for (const json& jv : require_field(doc, "variables")) {
            VariableSpec v;
            v.id = require_field(jv, "id").get<int>();
            v.name = require_field(jv, "name").get<std::string>();
            v.cardinality = require_field(jv, "cardinality").get<int>();
            std::string role = require_field(jv, "role").get<std::string>();
            if (role == "label") {
                v.role = VarRole::label;
            } else if (role == "feature") {
                v.role = VarRole::feature;
            } else {
                throw ParseError("field 'role' must be 'label' or 'feature', got '" + role + "'");
            }
            s.variables.push_back(std::move(v));
        }
        for (const json& je : require_field(doc, "edges")) {
            if (!je.is_array() || je.size() != 2) {
                throw ParseError("field 'edges' entries must be [u, v] pairs");
            }
            s.edges.push_back({je[0].get<int>(), je[1].get<int>()});
        }

        LogLinearParams p;
        const json& unary = require_field(doc, "unary");
        p.unary.resize(s.variables.size());
        for (std::size_t i = 0; i < s.variables.size(); ++i) {
            auto it = unary.find(std::to_string(i));
            if (it == unary.end()) {
                throw ParseError("field 'unary' is missing table for variable " + std::to_string(i));
            }
            p.unary[i] = it->get<std::vector<double>>();
        }
        const json& pairwise = require_field(doc, "pairwise");
        p.pairwise.resize(s.edges.size());
        for (std::size_t i = 0; i < s.edges.size(); ++i) {
            std::string key = std::to_string(s.edges[i].u) + "-" + std::to_string(s.edges[i].v);
            auto it = pairwise.find(key);
            if (it == pairwise.end()) {
                throw ParseError("field 'pairwise' is missing table for edge " + key);
            }
            p.pairwise[i] = it->get<std::vector<double>>();
        }

        try {
            return MarkovNetwork(std::move(s), std::move(p));
        } catch (const Error& e) {
            throw ParseError(std::string("model document inconsistent: ") + e.what());
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("model document field has wrong type: ") + e.what());
    }
}

}  // namespace mrfc

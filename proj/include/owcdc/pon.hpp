#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "owcdc/error.hpp"

namespace owcdc {

/// Cyclic AWGR routing: wavelength index w entering input port `in` of an
/// N x N router leaves on output port (in + w) mod N.
inline std::size_t awgr_route(std::size_t input_port, std::size_t wavelength, std::size_t n) {
    if (n == 0) throw DomainError("AWGR size must be positive");
    if (input_port >= n) throw DomainError("AWGR input port out of range");
    if (wavelength >= n) throw DomainError("wavelength index exceeds AWGR free spectral range");
    return (input_port + wavelength) % n;
}

struct Awgr {
    std::string name;
    std::size_t size = 0;
};

struct PortRef {
    std::size_t awgr = 0;
    std::size_t port = 0;

    friend auto operator<=>(const PortRef&, const PortRef&) = default;
};

/// A PON endpoint. `inputs` are the AWGR input ports it transmits into,
/// `outputs` the AWGR output ports that feed its receiver.
struct PonNode {
    std::string name;
    std::vector<PortRef> inputs;
    std::vector<PortRef> outputs;

    std::optional<std::size_t> input_on(std::size_t awgr) const {
        for (const auto& p : inputs)
            if (p.awgr == awgr) return p.port;
        return std::nullopt;
    }
    std::optional<std::size_t> output_on(std::size_t awgr) const {
        for (const auto& p : outputs)
            if (p.awgr == awgr) return p.port;
        return std::nullopt;
    }
};

/// Fiber from an output port of one AWGR into an input port of another.
struct Trunk {
    PortRef from;
    PortRef to;
};

struct PonTopology {
    std::vector<PonNode> nodes;
    std::vector<Awgr> awgrs;
    std::vector<Trunk> trunks;
    std::size_t wavelengths = 4;

    std::optional<std::size_t> node_index(const std::string& name) const {
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i].name == name) return i;
        return std::nullopt;
    }
};

inline void validate(const PonTopology& t) {
    if (t.nodes.empty()) throw ConfigError("topology has no nodes");
    if (t.awgrs.empty()) throw ConfigError("topology has no AWGRs");
    if (t.wavelengths == 0) throw ConfigError("wavelength count must be positive");
    for (const auto& a : t.awgrs) {
        if (a.size == 0) throw ConfigError("AWGR " + a.name + " has zero ports");
        if (t.wavelengths > a.size) {
            throw ConfigError("wavelength count exceeds the port count of AWGR " + a.name);
        }
    }
    std::set<std::string> names;
    std::set<PortRef> used_in, used_out;
    auto claim = [&](std::set<PortRef>& used, const PortRef& p, const std::string& who) {
        if (p.awgr >= t.awgrs.size()) throw ConfigError(who + " references a missing AWGR");
        if (p.port >= t.awgrs[p.awgr].size) throw ConfigError(who + " references a port beyond AWGR size");
        if (!used.insert(p).second) {
            throw ConfigError("port " + std::to_string(p.port) + " of AWGR " + t.awgrs[p.awgr].name +
                              " is used twice");
        }
    };
    for (const auto& n : t.nodes) {
        if (n.name.empty()) throw ConfigError("node name must not be empty");
        if (!names.insert(n.name).second) throw ConfigError("duplicate node name " + n.name);
        if (n.inputs.empty() || n.outputs.empty()) throw InfeasibleTopology("node " + n.name + " has no ports");
        std::set<std::size_t> in_awgrs, out_awgrs;
        for (const auto& p : n.inputs) {
            claim(used_in, p, "node " + n.name);
            if (!in_awgrs.insert(p.awgr).second) throw ConfigError("node " + n.name + " has two inputs on one AWGR");
        }
        for (const auto& p : n.outputs) {
            claim(used_out, p, "node " + n.name);
            if (!out_awgrs.insert(p.awgr).second) throw ConfigError("node " + n.name + " has two outputs on one AWGR");
        }
    }
    for (const auto& tr : t.trunks) {
        claim(used_out, tr.from, "trunk");
        claim(used_in, tr.to, "trunk");
    }
}

// ---------------------------------------------------------------------------
// Routing
// ---------------------------------------------------------------------------

enum class LinkKind { Uplink, Downlink, Trunk };

/// One wavelength on one unidirectional fiber. Uplinks run node -> AWGR,
/// downlinks AWGR -> node; `index` is the node or trunk index.
struct Resource {
    LinkKind kind = LinkKind::Uplink;
    std::size_t index = 0;
    std::size_t awgr = 0;
    std::size_t wavelength = 0;

    friend auto operator<=>(const Resource&, const Resource&) = default;
};

struct Route {
    std::size_t receiver = 0;
    std::size_t end_awgr = 0;
    std::size_t input_port = 0;
    std::size_t output_port = 0;
    std::vector<Resource> resources;
};

/// Physical path of wavelength w sent by `sender` into AWGR `awgr`,
/// following trunks. Empty when the sender has no input there, the light
/// leaves on an unconnected port, or the trunks form a loop.
inline std::optional<Route> route(const PonTopology& t, std::size_t sender, std::size_t awgr, std::size_t w) {
    const auto in = t.nodes.at(sender).input_on(awgr);
    if (!in) return std::nullopt;
    Route r;
    r.input_port = *in;
    r.resources.push_back({LinkKind::Uplink, sender, awgr, w});
    std::size_t a = awgr, port = *in;
    for (std::size_t hop = 0; hop <= t.trunks.size(); ++hop) {
        const std::size_t out = awgr_route(port, w, t.awgrs.at(a).size);
        const PortRef here{a, out};
        for (std::size_t n = 0; n < t.nodes.size(); ++n) {
            for (const auto& p : t.nodes[n].outputs) {
                if (p == here) {
                    r.receiver = n;
                    r.end_awgr = a;
                    r.output_port = out;
                    r.resources.push_back({LinkKind::Downlink, n, a, w});
                    return r;
                }
            }
        }
        const auto tr = std::find_if(t.trunks.begin(), t.trunks.end(), [&](const Trunk& x) { return x.from == here; });
        if (tr == t.trunks.end()) return std::nullopt;
        r.resources.push_back({LinkKind::Trunk, static_cast<std::size_t>(tr - t.trunks.begin()), a, w});
        a = tr->to.awgr;
        port = tr->to.port;
    }
    return std::nullopt;
}

struct AssignmentEntry {
    std::size_t sender = 0;
    std::size_t receiver = 0;
    std::size_t wavelength = 0;
    /// AWGR the sender transmits into.
    std::size_t awgr = 0;

    friend bool operator==(const AssignmentEntry&, const AssignmentEntry&) = default;
};

struct WavelengthAssignment {
    std::vector<AssignmentEntry> entries;

    const AssignmentEntry* find(std::size_t sender, std::size_t receiver) const {
        for (const auto& e : entries)
            if (e.sender == sender && e.receiver == receiver) return &e;
        return nullptr;
    }
    std::size_t connections() const { return entries.size(); }

    friend bool operator==(const WavelengthAssignment&, const WavelengthAssignment&) = default;
};

/// Every (awgr, wavelength) choice that carries `sender` to `receiver`, in
/// AWGR order then wavelength order.
inline std::vector<std::pair<AssignmentEntry, Route>> candidates(const PonTopology& t, std::size_t sender,
                                                                 std::size_t receiver) {
    std::vector<std::pair<AssignmentEntry, Route>> out;
    for (std::size_t a = 0; a < t.awgrs.size(); ++a) {
        for (std::size_t w = 0; w < t.wavelengths; ++w) {
            auto r = route(t, sender, a, w);
            if (r && r->receiver == receiver) out.push_back({{sender, receiver, w, a}, std::move(*r)});
        }
    }
    return out;
}

namespace detail {

struct PairOptions {
    std::vector<AssignmentEntry> entries;
    std::vector<std::vector<Resource>> resources;
};

struct Search {
    const std::vector<PairOptions>& pairs;
    std::set<Resource> used;
    std::vector<std::optional<std::size_t>> choice;
    std::vector<std::optional<std::size_t>> best_choice;
    std::size_t depth_count = 0;
    std::size_t best = 0;
    std::size_t ceiling = 0;

    bool free(const std::vector<Resource>& rs) const {
        return std::none_of(rs.begin(), rs.end(), [&](const Resource& r) { return used.contains(r); });
    }

    std::size_t optimistic(std::size_t from) const {
        std::size_t n = 0;
        for (std::size_t i = from; i < pairs.size(); ++i) {
            const auto& rs = pairs[i].resources;
            if (std::any_of(rs.begin(), rs.end(), [&](const auto& r) { return free(r); })) ++n;
        }
        return n;
    }

    void run(std::size_t i) {
        if (best == ceiling) return;
        if (i == pairs.size()) {
            if (depth_count > best) {
                best = depth_count;
                best_choice = choice;
            }
            return;
        }
        if (depth_count + optimistic(i) <= best) return;
        const auto& opt = pairs[i];
        for (std::size_t c = 0; c < opt.entries.size(); ++c) {
            if (!free(opt.resources[c])) continue;
            for (const auto& r : opt.resources[c]) used.insert(r);
            choice[i] = c;
            ++depth_count;
            run(i + 1);
            --depth_count;
            choice[i].reset();
            for (const auto& r : opt.resources[c]) used.erase(r);
            if (best == ceiling) return;
        }
        run(i + 1);
    }
};

}  // namespace detail

/// Assignment realizing the largest number of directed pairs without two
/// entries sharing a wavelength on any fiber. Exact backtracking over pairs in
/// (sender, receiver) order; the first optimum found in that order is kept.
inline WavelengthAssignment assign_wavelengths(const PonTopology& t) {
    validate(t);
    std::vector<detail::PairOptions> pairs;
    std::size_t ceiling = 0;
    for (std::size_t s = 0; s < t.nodes.size(); ++s) {
        for (std::size_t r = 0; r < t.nodes.size(); ++r) {
            if (s == r) continue;
            detail::PairOptions p;
            for (auto& [e, rt] : candidates(t, s, r)) {
                p.entries.push_back(e);
                std::sort(rt.resources.begin(), rt.resources.end());
                p.resources.push_back(std::move(rt.resources));
            }
            if (!p.entries.empty()) ++ceiling;
            pairs.push_back(std::move(p));
        }
    }
    detail::Search search{pairs, {}, std::vector<std::optional<std::size_t>>(pairs.size()), {}, 0, 0, ceiling};
    search.best_choice = search.choice;
    search.run(0);

    WavelengthAssignment out;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (search.best_choice[i]) out.entries.push_back(pairs[i].entries[*search.best_choice[i]]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

enum class ViolationKind { Missing, Duplicate, WavelengthRange, Routing, Collision };

constexpr const char* violation_name(ViolationKind k) {
    switch (k) {
        case ViolationKind::Missing: return "missing";
        case ViolationKind::Duplicate: return "duplicate";
        case ViolationKind::WavelengthRange: return "wavelength_range";
        case ViolationKind::Routing: return "routing";
        case ViolationKind::Collision: return "collision";
    }
    return "?";
}

struct Violation {
    ViolationKind kind = ViolationKind::Missing;
    std::size_t sender = 0;
    std::size_t receiver = 0;
    std::string message;
};

/// Checks completeness, routing consistency and fiber/wavelength exclusivity.
/// Collisions are judged on the path the light actually takes, one violation
/// per pair of entries that share any fiber at the same wavelength.
inline std::vector<Violation> validate_assignment(const WavelengthAssignment& a, const PonTopology& t) {
    std::vector<Violation> out;
    const std::size_t n = t.nodes.size();
    auto label = [&](std::size_t s, std::size_t r) {
        auto name = [&](std::size_t i) { return i < n ? t.nodes[i].name : "#" + std::to_string(i); };
        return name(s) + "->" + name(r);
    };

    std::vector<std::vector<std::size_t>> seen(n, std::vector<std::size_t>(n, 0));
    std::vector<std::pair<std::size_t, std::vector<Resource>>> paths;
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
        const auto& e = a.entries[i];
        if (e.sender >= n || e.receiver >= n || e.sender == e.receiver) {
            out.push_back({ViolationKind::Routing, e.sender, e.receiver, label(e.sender, e.receiver) + ": not a valid pair"});
            continue;
        }
        if (++seen[e.sender][e.receiver] == 2) {
            out.push_back({ViolationKind::Duplicate, e.sender, e.receiver, label(e.sender, e.receiver) + ": assigned twice"});
        }
        if (e.wavelength >= t.wavelengths) {
            out.push_back({ViolationKind::WavelengthRange, e.sender, e.receiver,
                           label(e.sender, e.receiver) + ": wavelength index " + std::to_string(e.wavelength) +
                               " not below " + std::to_string(t.wavelengths)});
            continue;
        }
        if (e.awgr >= t.awgrs.size() || e.wavelength >= t.awgrs[e.awgr].size) {
            out.push_back({ViolationKind::Routing, e.sender, e.receiver, label(e.sender, e.receiver) + ": no such AWGR"});
            continue;
        }
        const auto r = route(t, e.sender, e.awgr, e.wavelength);
        if (!r || r->receiver != e.receiver) {
            out.push_back({ViolationKind::Routing, e.sender, e.receiver,
                           label(e.sender, e.receiver) + ": wavelength does not route to the receiver on AWGR " +
                               t.awgrs[e.awgr].name});
        }
        if (r) {
            auto rs = r->resources;
            std::sort(rs.begin(), rs.end());
            paths.push_back({i, std::move(rs)});
        }
    }
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t r = 0; r < n; ++r) {
            if (s != r && seen[s][r] == 0) out.push_back({ViolationKind::Missing, s, r, label(s, r) + ": unassigned"});
        }
    }
    for (std::size_t i = 0; i < paths.size(); ++i) {
        for (std::size_t j = i + 1; j < paths.size(); ++j) {
            const auto& x = paths[i].second;
            const auto& y = paths[j].second;
            std::vector<Resource> common;
            std::set_intersection(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(common));
            if (common.empty()) continue;
            const auto& ei = a.entries[paths[i].first];
            const auto& ej = a.entries[paths[j].first];
            out.push_back({ViolationKind::Collision, ej.sender, ej.receiver,
                           label(ej.sender, ej.receiver) + " collides with " + label(ei.sender, ei.receiver)});
        }
    }
    return out;
}

/// Wavelength matrix without AWGR labels: entry [s][r] is a 0-based
/// wavelength index or empty.
using WavelengthMatrix = std::vector<std::vector<std::optional<std::size_t>>>;

/// Attaches an AWGR to each matrix entry: the first one over which the
/// wavelength reaches the receiver, else the sender's first input AWGR.
inline WavelengthAssignment resolve_matrix(const WavelengthMatrix& m, const PonTopology& t) {
    if (m.size() != t.nodes.size()) throw ConfigError("matrix size does not match node count");
    WavelengthAssignment a;
    for (std::size_t s = 0; s < m.size(); ++s) {
        if (m[s].size() != t.nodes.size()) throw ConfigError("matrix row size does not match node count");
        for (std::size_t r = 0; r < m[s].size(); ++r) {
            if (!m[s][r]) continue;
            const std::size_t w = *m[s][r];
            if (t.nodes[s].inputs.empty()) throw InfeasibleTopology("node " + t.nodes[s].name + " has no ports");
            std::size_t pick = t.nodes[s].inputs.front().awgr;
            for (std::size_t g = 0; g < t.awgrs.size(); ++g) {
                if (w >= t.wavelengths) break;
                const auto rt = route(t, s, g, w);
                if (rt && rt->receiver == r) {
                    pick = g;
                    break;
                }
            }
            a.entries.push_back({s, r, w, pick});
        }
    }
    return a;
}

inline WavelengthMatrix to_matrix(const WavelengthAssignment& a, std::size_t nodes) {
    WavelengthMatrix m(nodes, std::vector<std::optional<std::size_t>>(nodes));
    for (const auto& e : a.entries) m.at(e.sender).at(e.receiver) = e.wavelength;
    return m;
}

// ---------------------------------------------------------------------------
// Built-in topologies
// ---------------------------------------------------------------------------

/// Four APs and the OLT on two 5 x 5 AWGRs with direct fibers only.
inline PonTopology paper_default_topology() {
    PonTopology t;
    t.awgrs = {{"A", 5}, {"B", 5}};
    t.wavelengths = 4;
    t.nodes = {
        {"AP1", {{0, 4}}, {{1, 2}}},
        {"AP2", {{0, 2}, {1, 4}}, {{0, 2}, {1, 3}}},
        {"AP3", {{1, 2}}, {{0, 4}, {1, 1}}},
        {"AP4", {{0, 1}, {1, 1}}, {{0, 0}, {1, 4}}},
        {"OLT", {{0, 0}, {1, 0}}, {{0, 1}, {1, 0}}},
    };
    return t;
}

/// Reference wavelength matrix for the default topology (1-based entries
/// shifted to 0-based), rows are senders AP1..AP4, OLT.
inline WavelengthMatrix reference_assignment_matrix() {
    constexpr int raw[5][5] = {
        {0, 4, 1, 2, 3}, {4, 0, 3, 4, 2}, {1, 2, 0, 3, 4}, {2, 3, 4, 0, 1}, {3, 4, 2, 1, 0}};
    WavelengthMatrix m(5, std::vector<std::optional<std::size_t>>(5));
    for (std::size_t s = 0; s < 5; ++s)
        for (std::size_t r = 0; r < 5; ++r)
            if (raw[s][r] > 0) m[s][r] = static_cast<std::size_t>(raw[s][r] - 1);
    return m;
}

/// Names AP1..AP(n-1) followed by OLT.
inline std::vector<std::string> default_node_names(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i + 1 < n; ++i) out.push_back("AP" + std::to_string(i + 1));
    if (n > 0) out.push_back("OLT");
    return out;
}

/// n nodes on enough ring-shifted AWGRs that W wavelengths reach every
/// pair: AWGR a gives node j output port (j - 1 - aW) mod N, so it carries
/// the sender-to-receiver shifts aW+1 .. aW+W.
inline PonTopology make_topology(std::size_t n, std::size_t w) {
    if (n < 2) throw ConfigError("a topology needs at least two nodes");
    if (w == 0) throw ConfigError("wavelength count must be positive");
    const std::size_t size = std::max(n, w);
    const std::size_t count = (size > n) ? 1 : (n - 1 + w - 1) / w;
    PonTopology t;
    t.wavelengths = w;
    const auto names = default_node_names(n);
    for (std::size_t a = 0; a < count; ++a) {
        t.awgrs.push_back({std::string(1, static_cast<char>('A' + a % 26)) + (a >= 26 ? std::to_string(a / 26) : ""),
                           size});
    }
    for (std::size_t j = 0; j < n; ++j) {
        PonNode node{names[j], {}, {}};
        for (std::size_t a = 0; a < count; ++a) {
            node.inputs.push_back({a, j});
            const std::size_t shift = (1 + a * w) % size;
            node.outputs.push_back({a, (j + size - shift) % size});
        }
        t.nodes.push_back(std::move(node));
    }
    return t;
}

}  // namespace owcdc

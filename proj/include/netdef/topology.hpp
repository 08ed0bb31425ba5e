#pragma once

#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace netdef {

struct Link {
    int id;
    int a;
    int b;
};

// Immutable network graph with role annotations and the attacker's
// observability mask. Full topologies use dense ids 0..n-1; subgraphs
// returned by observable_subgraph() keep the original ids.
struct Topology {
    std::vector<int> nodes;   // sorted node ids
    std::vector<Link> links;  // sorted by link id
    std::set<int> critical;              // N_D
    std::set<int> migration_targets;     // N_M
    std::set<int> initial_compromised;   // initial N_A
    std::set<int> observable_nodes;      // N_O
    std::set<int> observable_links;      // L_O, link ids

    int node_count() const { return static_cast<int>(nodes.size()); }
    int link_count() const { return static_cast<int>(links.size()); }

    bool has_node(int id) const;
    int node_pos(int id) const;  // position in sorted node list
    int link_pos(int id) const;  // position in sorted link list

    // Checks all type invariants; throws std::runtime_error naming the
    // violated invariant. Connectivity is only required for full graphs.
    void validate(bool require_connected = true) const;

    // Adjacency as (neighbour node id, link id) lists, keyed by node id.
    std::unordered_map<int, std::vector<std::pair<int, int>>> adjacency() const;
};

struct GeneratorSpec {
    int node_count = 0;
    int link_count = 0;
    int critical_count = 1;
    int migration_count = 1;
    int initial_compromised_count = 1;
    double observable_fraction = 0.5;
    uint64_t seed = 0;

    void validate() const;
};

class topology_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

Topology load_topology(const std::string& text);
std::string save_topology(const Topology& t);

Topology generate_topology(const GeneratorSpec& spec);

// Restriction to N_O / L_O with ids preserved; roles intersected with N_O.
Topology observable_subgraph(const Topology& t);

// BFS closure over up links whose endpoints are not excluded. Always
// contains source. Throws if source is excluded or not a node of t.
std::set<int> reachable_set(const Topology& t, const std::set<int>& up_links,
                            const std::set<int>& excluded_nodes, int source);

// Dense re-indexing of a (sub)graph, with translation tables back to the
// original id space. Used to build the attacker's surrogate environment.
struct CompactTopology {
    Topology topo;                   // dense ids 0..k-1
    std::vector<int> node_of;        // dense node id -> original node id
    std::vector<int> link_of;        // dense link id -> original link id
    std::unordered_map<int, int> node_index;  // original -> dense
    std::unordered_map<int, int> link_index;
};
CompactTopology compact(const Topology& t);

}  // namespace netdef

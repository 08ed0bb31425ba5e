#include "netdef/topology.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <json.hpp>

#include "netdef/rng.hpp"

namespace netdef {

using nlohmann::json;

bool Topology::has_node(int id) const {
    return std::binary_search(nodes.begin(), nodes.end(), id);
}

int Topology::node_pos(int id) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), id);
    if (it == nodes.end() || *it != id) throw topology_error("unknown node id " + std::to_string(id));
    return static_cast<int>(it - nodes.begin());
}

int Topology::link_pos(int id) const {
    auto it = std::lower_bound(links.begin(), links.end(), id,
                               [](const Link& l, int v) { return l.id < v; });
    if (it == links.end() || it->id != id) throw topology_error("unknown link id " + std::to_string(id));
    return static_cast<int>(it - links.begin());
}

std::unordered_map<int, std::vector<std::pair<int, int>>> Topology::adjacency() const {
    std::unordered_map<int, std::vector<std::pair<int, int>>> adj;
    for (int n : nodes) adj[n];
    for (const Link& l : links) {
        adj[l.a].emplace_back(l.b, l.id);
        adj[l.b].emplace_back(l.a, l.id);
    }
    return adj;
}

namespace {

void require(bool cond, const std::string& what) {
    if (!cond) throw topology_error("invariant violation: " + what);
}

bool disjoint(const std::set<int>& a, const std::set<int>& b) {
    for (int x : a)
        if (b.count(x)) return false;
    return true;
}

}  // namespace

void Topology::validate(bool require_connected) const {
    require(std::is_sorted(nodes.begin(), nodes.end()), "node ids must be sorted");
    require(std::adjacent_find(nodes.begin(), nodes.end()) == nodes.end(), "duplicate node id");
    std::set<std::pair<int, int>> seen;
    int prev_id = -1;
    for (const Link& l : links) {
        require(l.id > prev_id, "link ids must be sorted and unique");
        prev_id = l.id;
        require(has_node(l.a) && has_node(l.b), "link endpoint is not a valid node id");
        require(l.a != l.b, "self-loop link");
        auto key = std::minmax(l.a, l.b);
        require(seen.insert(key).second, "duplicate link");
    }
    for (int n : critical) require(has_node(n), "critical node not in node set");
    for (int n : migration_targets) require(has_node(n), "migration target not in node set");
    for (int n : initial_compromised) require(has_node(n), "initial compromised node not in node set");
    require(disjoint(critical, migration_targets), "critical and migration sets overlap");
    require(disjoint(critical, initial_compromised), "critical and initial compromised sets overlap");
    require(disjoint(migration_targets, initial_compromised),
            "migration and initial compromised sets overlap");
    for (int n : observable_nodes) require(has_node(n), "observable node not in node set");
    for (int id : observable_links) {
        int pos = link_pos(id);
        const Link& l = links[pos];
        require(observable_nodes.count(l.a) && observable_nodes.count(l.b),
                "observable link with unobservable endpoint");
    }
    if (require_connected && node_count() > 1) {
        std::set<int> all_links;
        for (const Link& l : links) all_links.insert(l.id);
        auto reach = reachable_set(*this, all_links, {}, nodes.front());
        require(static_cast<int>(reach.size()) == node_count(), "graph is not connected");
    }
}

void GeneratorSpec::validate() const {
    if (node_count <= 0) throw topology_error("generator: node_count must be positive");
    if (link_count < node_count - 1) throw topology_error("generator: link_count < node_count-1");
    long long max_links = static_cast<long long>(node_count) * (node_count - 1) / 2;
    if (link_count > max_links) throw topology_error("generator: link_count exceeds simple-graph maximum");
    if (critical_count <= 0 || migration_count <= 0 || initial_compromised_count <= 0)
        throw topology_error("generator: role counts must be positive");
    if (critical_count + migration_count + initial_compromised_count > node_count)
        throw topology_error("generator: role counts exceed node_count");
    if (!(observable_fraction > 0.0 && observable_fraction <= 1.0))
        throw topology_error("generator: observable_fraction must be in (0,1]");
}

namespace {

json topology_to_json(const Topology& t) {
    json j;
    j["version"] = 1;
    j["nodes"] = t.nodes;
    json links = json::array();
    for (const Link& l : t.links) links.push_back(json::array({std::min(l.a, l.b), std::max(l.a, l.b)}));
    j["links"] = links;
    auto as_sorted = [](const std::set<int>& s) { return std::vector<int>(s.begin(), s.end()); };
    j["critical"] = as_sorted(t.critical);
    j["migration_targets"] = as_sorted(t.migration_targets);
    j["initial_compromised"] = as_sorted(t.initial_compromised);
    j["observable_nodes"] = as_sorted(t.observable_nodes);
    j["observable_links"] = as_sorted(t.observable_links);
    return j;
}

}  // namespace

std::string save_topology(const Topology& t) { return topology_to_json(t).dump(2) + "\n"; }

Topology load_topology(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw topology_error(std::string("topology parse error: ") + e.what());
    }
    auto field = [&](const char* name) -> const json& {
        if (!j.contains(name)) throw topology_error(std::string("topology file missing field '") + name + "'");
        return j.at(name);
    };
    if (field("version").get<int>() != 1) throw topology_error("unsupported topology file version");
    Topology t;
    t.nodes = field("nodes").get<std::vector<int>>();
    std::sort(t.nodes.begin(), t.nodes.end());
    int id = 0;
    for (const auto& pair : field("links")) {
        if (!pair.is_array() || pair.size() != 2)
            throw topology_error("links entry " + std::to_string(id) + " is not a pair");
        int a = pair[0].get<int>(), b = pair[1].get<int>();
        t.links.push_back({id++, a, b});
    }
    auto as_set = [&](const char* name) {
        auto v = field(name).get<std::vector<int>>();
        return std::set<int>(v.begin(), v.end());
    };
    t.critical = as_set("critical");
    t.migration_targets = as_set("migration_targets");
    t.initial_compromised = as_set("initial_compromised");
    t.observable_nodes = as_set("observable_nodes");
    t.observable_links = as_set("observable_links");
    t.validate(true);
    return t;
}

namespace {

// canonical order: pairs normalised (a<b) and sorted; ids assigned in order
void canonicalize_links(std::vector<std::pair<int, int>>& pairs, Topology& t) {
    for (auto& p : pairs)
        if (p.first > p.second) std::swap(p.first, p.second);
    std::sort(pairs.begin(), pairs.end());
    int id = 0;
    for (const auto& p : pairs) t.links.push_back({id++, p.first, p.second});
}

}  // namespace

Topology generate_topology(const GeneratorSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const int n = spec.node_count;

    Topology t;
    t.nodes.resize(n);
    for (int i = 0; i < n; ++i) t.nodes[i] = i;

    // random spanning tree: attach each node to a random earlier node
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    std::set<std::pair<int, int>> edge_set;
    std::vector<std::pair<int, int>> pairs;
    for (int i = 1; i < n; ++i) {
        int a = order[i];
        int b = order[rng.uniform_index(i)];
        auto key = std::minmax(a, b);
        edge_set.insert(key);
        pairs.push_back(key);
    }
    // extra links sampled uniformly among absent pairs
    long long max_links = static_cast<long long>(n) * (n - 1) / 2;
    while (static_cast<int>(pairs.size()) < spec.link_count) {
        if (static_cast<long long>(edge_set.size()) >= max_links)
            throw topology_error("generator: cannot place requested links");
        int a = rng.uniform_index(n);
        int b = rng.uniform_index(n);
        if (a == b) continue;
        auto key = std::minmax(a, b);
        if (!edge_set.insert(key).second) continue;
        pairs.push_back(key);
    }
    canonicalize_links(pairs, t);

    // roles sampled disjointly
    std::vector<int> pool(n);
    for (int i = 0; i < n; ++i) pool[i] = i;
    rng.shuffle(pool);
    size_t cursor = 0;
    auto take = [&](int count) {
        std::set<int> out;
        for (int i = 0; i < count; ++i) out.insert(pool[cursor++]);
        return out;
    };
    t.critical = take(spec.critical_count);
    t.migration_targets = take(spec.migration_count);
    t.initial_compromised = take(spec.initial_compromised_count);

    // observability mask: breadth-first growth from the compromised foothold,
    // first connecting all seeds through shortest paths so the observable
    // subgraph is a single component
    auto adj = t.adjacency();
    for (auto& [node, nbrs] : adj)
        std::sort(nbrs.begin(), nbrs.end());
    const int target = std::max<int>(static_cast<int>(std::ceil(spec.observable_fraction * n)),
                                     static_cast<int>(t.initial_compromised.size()));
    std::set<int> obs;
    int first_seed = *t.initial_compromised.begin();
    obs.insert(first_seed);
    auto path_from_obs = [&](int goal) {
        // BFS from the current observable set to goal, returns path nodes
        std::unordered_map<int, int> parent;
        std::deque<int> q;
        for (int s : obs) {
            parent[s] = s;
            q.push_back(s);
        }
        while (!q.empty()) {
            int u = q.front();
            q.pop_front();
            if (u == goal) break;
            for (auto [v, lid] : adj[u]) {
                if (!parent.count(v)) {
                    parent[v] = u;
                    q.push_back(v);
                }
            }
        }
        std::vector<int> path;
        for (int u = goal; parent.at(u) != u; u = parent.at(u)) path.push_back(u);
        return path;
    };
    for (int seed_node : t.initial_compromised) {
        if (!obs.count(seed_node))
            for (int u : path_from_obs(seed_node)) obs.insert(u);
    }
    // grow outward until target size; when at least half the network is
    // observable, keep growing until a critical node is covered
    std::vector<int> frontier(obs.begin(), obs.end());
    size_t head = 0;
    auto contains_critical = [&] {
        for (int c : t.critical)
            if (obs.count(c)) return true;
        return false;
    };
    while (static_cast<int>(obs.size()) < target ||
           (spec.observable_fraction >= 0.5 && !contains_critical())) {
        bool grew = false;
        while (head < frontier.size()) {
            int u = frontier[head];
            std::vector<int> fresh;
            for (auto [v, lid] : adj[u])
                if (!obs.count(v)) fresh.push_back(v);
            if (fresh.empty()) {
                ++head;
                continue;
            }
            int v = fresh[rng.uniform_index(static_cast<int>(fresh.size()))];
            obs.insert(v);
            frontier.push_back(v);
            grew = true;
            break;
        }
        if (!grew) break;  // whole graph covered
    }
    t.observable_nodes = obs;
    for (const Link& l : t.links)
        if (obs.count(l.a) && obs.count(l.b)) t.observable_links.insert(l.id);

    t.validate(true);
    return t;
}

Topology observable_subgraph(const Topology& t) {
    Topology s;
    s.nodes.assign(t.observable_nodes.begin(), t.observable_nodes.end());
    for (const Link& l : t.links)
        if (t.observable_links.count(l.id)) s.links.push_back(l);
    auto restrict = [&](const std::set<int>& src) {
        std::set<int> out;
        for (int n : src)
            if (t.observable_nodes.count(n)) out.insert(n);
        return out;
    };
    s.critical = restrict(t.critical);
    s.migration_targets = restrict(t.migration_targets);
    s.initial_compromised = restrict(t.initial_compromised);
    s.observable_nodes = std::set<int>(s.nodes.begin(), s.nodes.end());
    for (const Link& l : s.links) s.observable_links.insert(l.id);
    s.validate(false);
    return s;
}

std::set<int> reachable_set(const Topology& t, const std::set<int>& up_links,
                            const std::set<int>& excluded_nodes, int source) {
    if (!t.has_node(source)) throw topology_error("reachable_set: source is not a node");
    if (excluded_nodes.count(source)) throw topology_error("reachable_set: source is excluded");
    std::unordered_map<int, std::vector<int>> adj;
    for (const Link& l : t.links) {
        if (!up_links.count(l.id)) continue;
        if (excluded_nodes.count(l.a) || excluded_nodes.count(l.b)) continue;
        adj[l.a].push_back(l.b);
        adj[l.b].push_back(l.a);
    }
    std::set<int> seen{source};
    std::deque<int> q{source};
    while (!q.empty()) {
        int u = q.front();
        q.pop_front();
        for (int v : adj[u])
            if (seen.insert(v).second) q.push_back(v);
    }
    return seen;
}

CompactTopology compact(const Topology& t) {
    CompactTopology c;
    c.node_of = t.nodes;
    for (int i = 0; i < static_cast<int>(t.nodes.size()); ++i) c.node_index[t.nodes[i]] = i;
    Topology& d = c.topo;
    d.nodes.resize(t.nodes.size());
    for (size_t i = 0; i < t.nodes.size(); ++i) d.nodes[i] = static_cast<int>(i);
    int lid = 0;
    for (const Link& l : t.links) {
        c.link_of.push_back(l.id);
        c.link_index[l.id] = lid;
        d.links.push_back({lid++, c.node_index.at(l.a), c.node_index.at(l.b)});
    }
    auto remap = [&](const std::set<int>& src) {
        std::set<int> out;
        for (int n : src) out.insert(c.node_index.at(n));
        return out;
    };
    d.critical = remap(t.critical);
    d.migration_targets = remap(t.migration_targets);
    d.initial_compromised = remap(t.initial_compromised);
    d.observable_nodes = remap(t.observable_nodes);
    for (int id : t.observable_links) d.observable_links.insert(c.link_index.at(id));
    return c;
}

}  // namespace netdef

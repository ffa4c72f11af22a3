#include "graynet/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

namespace graynet::graph {

namespace {

using nlohmann::json;

template <class T>
const T* find_by_id(const std::vector<T>& items, const std::string& id) {
    for (const T& item : items) {
        if (item.id == id) return &item;
    }
    return nullptr;
}

const char* relation_class_name(RelationClass kind) {
    return kind == RelationClass::SubjectSubject ? "subject_subject" : "object_object";
}

RelationClass parse_relation_class(const std::string& text) {
    if (text == "subject_subject") return RelationClass::SubjectSubject;
    if (text == "object_object") return RelationClass::ObjectObject;
    fail(Errc::parse_error, "unknown relation class '" + text + "'");
}

const char* hidden_kind_name(HiddenKind kind) {
    return kind == HiddenKind::Darknet ? "darknet" : "broker";
}

HiddenKind parse_hidden_kind(const std::string& text) {
    if (text == "darknet") return HiddenKind::Darknet;
    if (text == "broker") return HiddenKind::Broker;
    fail(Errc::parse_error, "unknown hidden kind '" + text + "'");
}

}  // namespace

bool ActionRelationalGraph::has_subject(const std::string& id) const {
    return find_by_id(subjects, id) != nullptr;
}

bool ActionRelationalGraph::has_object(const std::string& id) const {
    return find_by_id(objects, id) != nullptr;
}

bool ActionRelationalGraph::has_hidden(const std::string& id) const {
    return find_by_id(hidden, id) != nullptr;
}

bool ActionRelationalGraph::has_vertex(const std::string& id) const {
    return has_subject(id) || has_object(id) || has_hidden(id);
}

const Subject* ActionRelationalGraph::find_subject(const std::string& id) const {
    return find_by_id(subjects, id);
}

const Object* ActionRelationalGraph::find_object(const std::string& id) const {
    return find_by_id(objects, id);
}

ActionRelationalGraph build_graph(std::vector<Subject> subjects, std::vector<Object> objects,
                                  std::vector<HiddenVertex> hidden, std::vector<Action> actions,
                                  std::vector<Relation> relations) {
    ActionRelationalGraph g;
    g.subjects = std::move(subjects);
    g.objects = std::move(objects);
    g.hidden = std::move(hidden);
    g.actions = std::move(actions);
    g.relations = std::move(relations);

    std::set<std::string> ids;
    auto claim = [&](const std::string& id) {
        require(ids.insert(id).second, Errc::duplicate_id, "vertex id '" + id + "' repeats");
    };
    for (const Subject& s : g.subjects) claim(s.id);
    for (const Object& o : g.objects) claim(o.id);
    for (const HiddenVertex& h : g.hidden) claim(h.id);

    for (const Object& o : g.objects) {
        require(o.probability >= 0.0 && o.probability <= 1.0, Errc::invalid_spec,
                "object probability out of [0, 1]: " + o.id);
    }
    for (const Action& a : g.actions) {
        require(ids.count(a.from) && ids.count(a.to), Errc::dangling_endpoint,
                "action endpoint missing: " + a.from + " -> " + a.to);
        require(a.t_start <= a.t_end, Errc::invalid_spec,
                "action time range inverted: " + a.from + " -> " + a.to);
    }
    for (const Relation& r : g.relations) {
        require(std::isfinite(r.w_forward) && std::isfinite(r.w_backward), Errc::invalid_spec,
                "relation weight not finite");
        require(r.w_forward >= 0.0 && r.w_backward >= 0.0, Errc::negative_weight,
                "relation weights must be nonnegative");
        const bool both_subjects = g.has_subject(r.endpoint_a) && g.has_subject(r.endpoint_b);
        const bool both_objects = g.has_object(r.endpoint_a) && g.has_object(r.endpoint_b);
        if (r.kind == RelationClass::SubjectSubject) {
            require(both_subjects, Errc::dangling_endpoint,
                    "subject_subject relation endpoints must both be subjects: " + r.endpoint_a +
                        " / " + r.endpoint_b);
        } else {
            require(both_objects, Errc::dangling_endpoint,
                    "object_object relation endpoints must both be objects: " + r.endpoint_a +
                        " / " + r.endpoint_b);
        }
    }
    return g;
}

double hidden_affinity(const ActionRelationalGraph& graph, const std::string& hidden_id,
                       const std::string& seed_id) {
    require(graph.has_hidden(hidden_id), Errc::unknown_vertex,
            "not a hidden vertex: " + hidden_id);
    require(graph.has_subject(seed_id) || graph.has_object(seed_id), Errc::unknown_vertex,
            "not a subject or object: " + seed_id);
    double total = 0.0;
    for (const Action& a : graph.actions) {
        const bool joins = (a.from == hidden_id && a.to == seed_id) ||
                           (a.from == seed_id && a.to == hidden_id);
        if (joins) total += 1.0 / (1.0 + a.duration());
    }
    return total;
}

Graynet granularize(const ActionRelationalGraph& graph, double t_g,
                    std::span<const std::string> subject_seeds,
                    std::span<const std::string> object_seeds) {
    require(t_g > 0.0, Errc::nonpositive_granularity, "granularity must be positive");
    require(!subject_seeds.empty(), Errc::empty_seed_set, "need at least one subject seed");
    require(!object_seeds.empty(), Errc::empty_seed_set, "need at least one object seed");
    for (const std::string& s : subject_seeds) {
        require(graph.has_subject(s), Errc::unknown_vertex, "subject seed missing: " + s);
    }
    for (const std::string& o : object_seeds) {
        require(graph.has_object(o), Errc::unknown_vertex, "object seed missing: " + o);
    }

    Graynet net;
    net.granularity = t_g;
    for (const std::string& s : subject_seeds) net.subject_clusters[s] = {s};
    for (const std::string& o : object_seeds) net.object_clusters[o] = {o};

    // Collect every seed once, sorted, so the argmax tie-break is the
    // lexicographically smallest id across both seed lists.
    std::vector<std::string> all_seeds(subject_seeds.begin(), subject_seeds.end());
    all_seeds.insert(all_seeds.end(), object_seeds.begin(), object_seeds.end());
    std::sort(all_seeds.begin(), all_seeds.end());
    all_seeds.erase(std::unique(all_seeds.begin(), all_seeds.end()), all_seeds.end());

    std::map<std::string, std::string> assignment;  // hidden id -> seed id
    for (const HiddenVertex& h : graph.hidden) {
        std::string best_seed;
        double best = -1.0;
        for (const std::string& seed : all_seeds) {
            const double a = hidden_affinity(graph, h.id, seed);
            if (a > best) {
                best = a;
                best_seed = seed;
            }
        }
        if (best >= t_g) {
            assignment[h.id] = best_seed;
            if (net.subject_clusters.count(best_seed)) {
                net.subject_clusters[best_seed].insert(h.id);
            } else {
                net.object_clusters[best_seed].insert(h.id);
            }
        }
    }

    // Base graph: hidden set dropped, actions restricted to endpoints that
    // survive (relations never touch hidden vertices).
    net.base.subjects = graph.subjects;
    net.base.objects = graph.objects;
    for (const Action& a : graph.actions) {
        const bool from_ok = graph.has_subject(a.from) || graph.has_object(a.from);
        const bool to_ok = graph.has_subject(a.to) || graph.has_object(a.to);
        if (from_ok && to_ok) net.base.actions.push_back(a);
    }
    net.base.relations = graph.relations;

    // Congruity actions/relations: both endpoints inside one cluster.
    auto cluster_of = [&](const std::string& id) -> const std::string* {
        if (assignment.count(id)) return &assignment.at(id);
        for (const auto& [seed, members] : net.subject_clusters) {
            if (seed == id) return &seed;
        }
        for (const auto& [seed, members] : net.object_clusters) {
            if (seed == id) return &seed;
        }
        return nullptr;
    };
    for (const Action& a : graph.actions) {
        const std::string* ca = cluster_of(a.from);
        const std::string* cb = cluster_of(a.to);
        if (ca && cb && *ca == *cb) net.congruity_actions.push_back(a);
    }
    for (const Relation& r : graph.relations) {
        const std::string* ca = cluster_of(r.endpoint_a);
        const std::string* cb = cluster_of(r.endpoint_b);
        if (ca && cb && *ca == *cb) net.congruity_relations.push_back(r);
    }
    return net;
}

std::string graph_to_json(const ActionRelationalGraph& graph) {
    json doc;
    doc["subjects"] = json::array();
    for (const Subject& s : graph.subjects) {
        doc["subjects"].push_back({{"id", s.id}, {"behavior", s.behavior}, {"feedback", s.feedback}});
    }
    doc["objects"] = json::array();
    for (const Object& o : graph.objects) {
        doc["objects"].push_back({{"id", o.id}, {"state", o.state}, {"probability", o.probability}});
    }
    doc["hidden"] = json::array();
    for (const HiddenVertex& h : graph.hidden) {
        doc["hidden"].push_back({{"id", h.id}, {"kind", hidden_kind_name(h.kind)}});
    }
    doc["actions"] = json::array();
    for (const Action& a : graph.actions) {
        doc["actions"].push_back(
            {{"from", a.from}, {"to", a.to}, {"t_start", a.t_start}, {"t_end", a.t_end}});
    }
    doc["relations"] = json::array();
    for (const Relation& r : graph.relations) {
        doc["relations"].push_back({{"endpoint_a", r.endpoint_a},
                                    {"endpoint_b", r.endpoint_b},
                                    {"class", relation_class_name(r.kind)},
                                    {"w_forward", r.w_forward},
                                    {"w_backward", r.w_backward}});
    }
    return doc.dump(2);
}

ActionRelationalGraph graph_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        fail(Errc::parse_error, std::string("graph document: ") + e.what());
    }
    try {
        std::vector<Subject> subjects;
        for (const json& j : doc.value("subjects", json::array())) {
            subjects.push_back({j.at("id").get<std::string>(), j.at("behavior").get<double>(),
                                j.at("feedback").get<double>()});
        }
        std::vector<Object> objects;
        for (const json& j : doc.value("objects", json::array())) {
            objects.push_back({j.at("id").get<std::string>(), j.at("state").get<double>(),
                               j.at("probability").get<double>()});
        }
        std::vector<HiddenVertex> hidden;
        for (const json& j : doc.value("hidden", json::array())) {
            hidden.push_back(
                {j.at("id").get<std::string>(), parse_hidden_kind(j.at("kind").get<std::string>())});
        }
        std::vector<Action> actions;
        for (const json& j : doc.value("actions", json::array())) {
            actions.push_back({j.at("from").get<std::string>(), j.at("to").get<std::string>(),
                               j.at("t_start").get<double>(), j.at("t_end").get<double>()});
        }
        std::vector<Relation> relations;
        for (const json& j : doc.value("relations", json::array())) {
            relations.push_back({j.at("endpoint_a").get<std::string>(),
                                 j.at("endpoint_b").get<std::string>(),
                                 parse_relation_class(j.at("class").get<std::string>()),
                                 j.at("w_forward").get<double>(), j.at("w_backward").get<double>()});
        }
        return build_graph(std::move(subjects), std::move(objects), std::move(hidden),
                           std::move(actions), std::move(relations));
    } catch (const json::exception& e) {
        fail(Errc::parse_error, std::string("graph document: ") + e.what());
    }
}

void save_graph(const ActionRelationalGraph& graph, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), Errc::io_error, "cannot open " + path);
    out << graph_to_json(graph) << "\n";
    require(out.good(), Errc::io_error, "write failed: " + path);
}

ActionRelationalGraph load_graph(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), Errc::io_error, "cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return graph_from_json(text);
}

}  // namespace graynet::graph

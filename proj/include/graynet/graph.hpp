#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "graynet/errors.hpp"

namespace graynet::graph {

// Subjective vertex (a client): scalar behavior and feedback attributes.
struct Subject {
    std::string id;
    double behavior = 0.0;
    double feedback = 0.0;
};

// Objective vertex (a server): scalar state and a probability in [0, 1].
struct Object {
    std::string id;
    double state = 0.0;
    double probability = 0.0;
};

enum class HiddenKind { Darknet, Broker };

struct HiddenVertex {
    std::string id;
    HiddenKind kind = HiddenKind::Darknet;
};

// Timed action between two vertices, t_start <= t_end (seconds).
struct Action {
    std::string from;
    std::string to;
    double t_start = 0.0;
    double t_end = 0.0;

    double duration() const { return t_end - t_start; }
};

enum class RelationClass { SubjectSubject, ObjectObject };

// Weighted relation between two subjects or two objects.
struct Relation {
    std::string endpoint_a;
    std::string endpoint_b;
    RelationClass kind = RelationClass::SubjectSubject;
    double w_forward = 0.0;
    double w_backward = 0.0;
};

struct ActionRelationalGraph {
    std::vector<Subject> subjects;
    std::vector<Object> objects;
    std::vector<HiddenVertex> hidden;
    std::vector<Action> actions;
    std::vector<Relation> relations;

    bool has_subject(const std::string& id) const;
    bool has_object(const std::string& id) const;
    bool has_hidden(const std::string& id) const;
    bool has_vertex(const std::string& id) const;
    const Subject* find_subject(const std::string& id) const;
    const Object* find_object(const std::string& id) const;
};

// Validating constructor: rejects duplicate ids, dangling endpoints,
// negative weights and inverted time ranges.
ActionRelationalGraph build_graph(std::vector<Subject> subjects, std::vector<Object> objects,
                                  std::vector<HiddenVertex> hidden, std::vector<Action> actions,
                                  std::vector<Relation> relations);

// Recency-and-brevity weighted tie strength: sum of 1 / (1 + duration) over
// all actions joining the two vertices, in either direction.
double hidden_affinity(const ActionRelationalGraph& graph, const std::string& hidden_id,
                       const std::string& seed_id);

// The granularized graynet: hidden vertices folded into subject/object
// coalition clusters, hidden set dropped from the base graph.
struct Graynet {
    ActionRelationalGraph base;
    double granularity = 1.0;
    // seed id -> cluster members (the seed itself plus assigned hidden ids)
    std::map<std::string, std::set<std::string>> subject_clusters;
    std::map<std::string, std::set<std::string>> object_clusters;
    std::vector<Action> congruity_actions;
    std::vector<Relation> congruity_relations;
};

// Assigns each hidden vertex to the seed with maximal affinity when that
// affinity reaches t_g; ties break toward the lexicographically smallest
// seed id, below-threshold vertices stay out of the graynet entirely.
Graynet granularize(const ActionRelationalGraph& graph, double t_g,
                    std::span<const std::string> subject_seeds,
                    std::span<const std::string> object_seeds);

// Single-document serialization; round trips losslessly.
std::string graph_to_json(const ActionRelationalGraph& graph);
ActionRelationalGraph graph_from_json(const std::string& text);
void save_graph(const ActionRelationalGraph& graph, const std::string& path);
ActionRelationalGraph load_graph(const std::string& path);

}  // namespace graynet::graph

#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "taskmem/embed.hpp"
#include "taskmem/layout.hpp"
#include "taskmem/memory.hpp"

namespace taskmem::classify {

inline constexpr double kDefaultDedupThreshold = 0.85;

// True when every non-empty signature field equals the element attribute of
// the same name after trimming. A field that is exactly a "[param]"
// placeholder matches any non-empty attribute value.
bool element_matches(const UiSignature& sig, const layout::HtmlElement& el);

// All matching element indexes in ascending order.
std::vector<int> matching_elements(const UiSignature& sig, const layout::ScreenRepresentation& rep);

// Lowest matching index.
std::optional<int> match_signature(const UiSignature& sig, const layout::ScreenRepresentation& rep);

// (sub-task name, position in key_ui_refs) -> element index
using SignatureBindings = std::map<std::pair<std::string, int>, int>;

struct ClassificationResult {
    std::optional<memory::NodeId> node;
    SignatureBindings bindings;

    bool matched() const { return node.has_value(); }
};

struct NodeTrace {
    memory::NodeId node = 0;
    bool matched = false;
    std::string detail;  // first unbound sub-task/signature when unmatched
};

ClassificationResult classify(const memory::MemoryData& mem, const layout::ScreenRepresentation& rep,
                              std::vector<NodeTrace>* trace = nullptr);
ClassificationResult classify(const memory::AppMemory& mem, const layout::ScreenRepresentation& rep);

// One "name: description" line per non-global sub-task.
std::string sub_task_document(const std::vector<memory::SubTask>& sub_tasks);

double sub_task_similarity(const std::vector<memory::SubTask>& a, const std::vector<memory::SubTask>& b,
                           const Embedder& embedder = default_embedder());

// Existing node whose sub-task list is at least `threshold` similar; the most
// similar one wins, ties to the lowest node id.
std::optional<memory::NodeId> dedup_candidate(const memory::MemoryData& mem, const std::vector<memory::SubTask>& new_sub_tasks,
                                              const Embedder& embedder = default_embedder(),
                                              double threshold = kDefaultDedupThreshold);

}  // namespace taskmem::classify

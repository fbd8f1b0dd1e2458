#include "taskmem/classify.hpp"

#include <functional>
#include <set>

#include "taskmem/text.hpp"

namespace taskmem::classify {

namespace {

bool field_matches(const std::optional<std::string>& want, const std::string* have) {
    if (!want) return true;
    auto w = text::trim(*want);
    if (w.empty()) return true;
    if (have == nullptr || have->empty()) return false;
    if (text::is_placeholder(w)) return true;
    return w == text::trim(*have);
}

// Assigns each signature of one sub-task to a distinct element.
bool bind_distinct(const std::vector<std::vector<int>>& candidates, std::size_t at, std::set<int>& used,
                   std::vector<int>& chosen) {
    if (at == candidates.size()) return true;
    for (int idx : candidates[at]) {
        if (used.contains(idx)) continue;
        used.insert(idx);
        chosen[at] = idx;
        if (bind_distinct(candidates, at + 1, used, chosen)) return true;
        used.erase(idx);
    }
    return false;
}

struct NodeScore {
    std::size_t sub_tasks = 0;
    std::size_t signatures = 0;
};

}  // namespace

bool element_matches(const UiSignature& sig, const layout::HtmlElement& el) {
    if (sig.empty()) return false;
    return field_matches(sig.id, el.attribute(layout::kAttrId)) &&
           field_matches(sig.text, el.attribute(layout::kAttrText)) &&
           field_matches(sig.description, el.attribute(layout::kAttrDescription)) &&
           field_matches(sig.cls, el.attribute(layout::kAttrClass));
}

std::vector<int> matching_elements(const UiSignature& sig, const layout::ScreenRepresentation& rep) {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(rep.size()); ++i) {
        if (element_matches(sig, rep.element(i))) out.push_back(i);
    }
    return out;
}

std::optional<int> match_signature(const UiSignature& sig, const layout::ScreenRepresentation& rep) {
    for (int i = 0; i < static_cast<int>(rep.size()); ++i) {
        if (element_matches(sig, rep.element(i))) return i;
    }
    return std::nullopt;
}

ClassificationResult classify(const memory::MemoryData& mem, const layout::ScreenRepresentation& rep,
                              std::vector<NodeTrace>* trace) {
    ClassificationResult best;
    NodeScore best_score;
    for (const auto& [id, node] : mem.nodes) {
        NodeTrace t{id, false, {}};
        SignatureBindings bindings;
        NodeScore score;
        bool ok = true;
        for (const auto& st : node.sub_tasks) {
            if (memory::is_global_sub_task(st.name)) continue;
            if (st.key_ui_refs.empty()) continue;
            std::vector<std::vector<int>> candidates;
            for (const auto& sig : st.key_ui_refs) candidates.push_back(matching_elements(sig, rep));
            std::set<int> used;
            std::vector<int> chosen(candidates.size(), -1);
            if (!bind_distinct(candidates, 0, used, chosen)) {
                ok = false;
                t.detail = "sub-task '" + st.name + "' has no binding for its key UI";
                break;
            }
            for (std::size_t i = 0; i < chosen.size(); ++i) bindings[{st.name, static_cast<int>(i)}] = chosen[i];
            ++score.sub_tasks;
            score.signatures += st.key_ui_refs.size();
        }
        if (ok && score.sub_tasks == 0) {
            ok = false;
            t.detail = "node has no verifiable sub-task";
        }
        t.matched = ok;
        if (trace != nullptr) trace->push_back(t);
        if (!ok) continue;
        bool better = !best.node || score.sub_tasks > best_score.sub_tasks ||
                      (score.sub_tasks == best_score.sub_tasks && score.signatures > best_score.signatures);
        if (better) {
            best.node = id;
            best.bindings = std::move(bindings);
            best_score = score;
        }
    }
    return best;
}

ClassificationResult classify(const memory::AppMemory& mem, const layout::ScreenRepresentation& rep) {
    return classify(mem.snapshot(), rep);
}

std::string sub_task_document(const std::vector<memory::SubTask>& sub_tasks) {
    std::string doc;
    for (const auto& st : sub_tasks) {
        if (memory::is_global_sub_task(st.name)) continue;
        doc += st.name + ": " + st.description + "\n";
    }
    return doc;
}

double sub_task_similarity(const std::vector<memory::SubTask>& a, const std::vector<memory::SubTask>& b,
                           const Embedder& embedder) {
    return cosine_similarity(embedder.embed(sub_task_document(a)), embedder.embed(sub_task_document(b)));
}

std::optional<memory::NodeId> dedup_candidate(const memory::MemoryData& mem, const std::vector<memory::SubTask>& new_sub_tasks,
                                              const Embedder& embedder, double threshold) {
    auto probe = embedder.embed(sub_task_document(new_sub_tasks));
    std::optional<memory::NodeId> best;
    double best_sim = -1.0;
    for (const auto& [id, node] : mem.nodes) {
        double sim = cosine_similarity(probe, embedder.embed(sub_task_document(node.sub_tasks)));
        if (sim >= threshold && sim > best_sim) {
            best = id;
            best_sim = sim;
        }
    }
    return best;
}

}  // namespace taskmem::classify

#include "taskmem/adapt.hpp"

#include "taskmem/classify.hpp"
#include "taskmem/error.hpp"
#include "taskmem/prompts.hpp"
#include "taskmem/structured.hpp"
#include "taskmem/text.hpp"

namespace taskmem::adapt {

namespace {

std::optional<std::string> attr(const layout::HtmlElement& el, std::string_view name) {
    const auto* v = el.attribute(name);
    if (v == nullptr || v->empty()) return std::nullopt;
    return *v;
}

// "[param]" when the value equals a bound parameter value, else the value.
std::string parameterize(const std::string& value, const ParameterBinding& binding, bool exact_case = false) {
    for (const auto& [name, bound] : binding) {
        if (!bound || bound->empty()) continue;
        if (exact_case ? value == *bound : text::iequals(value, *bound)) return text::make_placeholder(name);
    }
    return value;
}

void parameterize(std::optional<std::string>& field, const ParameterBinding& binding) {
    if (field) field = parameterize(*field, binding);
}

std::string substitute(const std::string& tmpl, const ParameterBinding& binding) {
    std::string out;
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        auto open = tmpl.find('[', pos);
        if (open == std::string::npos) break;
        auto close = tmpl.find(']', open);
        if (close == std::string::npos) break;
        auto name = text::placeholder_name(std::string_view(tmpl).substr(open, close - open + 1));
        if (!name) {
            out.append(tmpl, pos, open + 1 - pos);
            pos = open + 1;
            continue;
        }
        auto it = binding.find(*name);
        if (it == binding.end() || !it->second) {
            throw Error(ErrorKind::UnboundParameter, "parameter '" + *name + "' has no value");
        }
        out.append(tmpl, pos, open - pos);
        out += *it->second;
        pos = close + 1;
    }
    out.append(tmpl, pos);
    return out;
}

struct FieldWant {
    std::string value;
    bool substituted = false;
};

std::optional<FieldWant> concretize(const std::optional<std::string>& field, const ParameterBinding& binding) {
    if (!field) return std::nullopt;
    auto t = text::trim(*field);
    if (t.empty()) return std::nullopt;
    auto s = substitute(t, binding);
    return FieldWant{s, s != t};
}

bool field_ok(const std::optional<FieldWant>& want, const layout::HtmlElement& el, std::string_view name) {
    if (!want) return true;
    const auto* have = el.attribute(name);
    if (have == nullptr) return false;
    return want->substituted ? text::iequals(want->value, *have) : want->value == *have;
}

int resolve(const UiSignature& sig, const layout::ScreenRepresentation& rep, const ParameterBinding& binding) {
    auto id = concretize(sig.id, binding);
    auto txt = concretize(sig.text, binding);
    auto desc = concretize(sig.description, binding);
    auto cls = concretize(sig.cls, binding);
    if (!id && !txt && !desc && !cls) throw Error(ErrorKind::AdaptationFailed, "empty target signature");
    std::vector<int> hits;
    for (int i = 0; i < static_cast<int>(rep.size()); ++i) {
        const auto& el = rep.element(i);
        if (field_ok(id, el, layout::kAttrId) && field_ok(txt, el, layout::kAttrText) &&
            field_ok(desc, el, layout::kAttrDescription) && field_ok(cls, el, layout::kAttrClass)) {
            hits.push_back(i);
        }
    }
    if (hits.empty()) throw Error(ErrorKind::AdaptationFailed, "no element matches the target signature");
    if (hits.size() > 1 && !txt) {
        throw Error(ErrorKind::AdaptationFailed, std::to_string(hits.size()) + " elements match a target without text");
    }
    return hits.front();
}

std::string action_json(const Action& a) { return llm::serialize(llm::DerivedAction{a, false}); }

}  // namespace

UiSignature signature_of(const layout::HtmlElement& el) {
    return {attr(el, layout::kAttrId), attr(el, layout::kAttrText), attr(el, layout::kAttrDescription),
            attr(el, layout::kAttrClass)};
}

GeneralizedAction generalize(const Action& action, const layout::ScreenRepresentation& rep,
                             const ParameterBinding& binding, bool strict) {
    GeneralizedAction g;
    g.kind = action.kind;
    g.direction = action.direction;
    // Typed text is reproduced verbatim on apply, so it only matches exactly.
    if (action.text) g.text_template = parameterize(*action.text, binding, true);
    if (action.ui_index) {
        if (!rep.contains(*action.ui_index)) {
            throw Error(ErrorKind::UnknownIndex, "There is no UI with index " + std::to_string(*action.ui_index));
        }
        UiSignature sig = signature_of(rep.element(*action.ui_index));
        if (sig.empty()) throw Error(ErrorKind::GeneralizationFailed, "target element has no key attributes");
        parameterize(sig.id, binding);
        parameterize(sig.text, binding);
        parameterize(sig.description, binding);
        parameterize(sig.cls, binding);
        g.target = std::move(sig);
    }
    if (strict && g.target) {
        std::optional<Action> back;
        try {
            back = apply(g, rep, binding);
        } catch (const Error&) {
        }
        if (!back || *back != action) {
            throw Error(ErrorKind::GeneralizationFailed, "'" + g.to_display() + "' does not identify " + action.to_display());
        }
    }
    return g;
}

Action apply(const GeneralizedAction& gen, const layout::ScreenRepresentation& rep, const ParameterBinding& binding) {
    Action a;
    a.kind = gen.kind;
    a.direction = gen.direction;
    if (gen.text_template) a.text = substitute(*gen.text_template, binding);
    if (gen.target) a.ui_index = resolve(*gen.target, rep, binding);
    return a;
}

bool is_scroll_run(const std::vector<GeneralizedAction>& actions, std::size_t at) {
    if (at >= actions.size() || actions[at].kind != ActionKind::scroll) return false;
    std::size_t end = at;
    while (end < actions.size() && actions[end].kind == ActionKind::scroll) ++end;
    return end < actions.size() && is_targeted(actions[end].kind);
}

ScrollStep adapt_scroll(const std::vector<GeneralizedAction>& actions, ScrollCursor& cursor,
                        const layout::ScreenRepresentation& rep, const ParameterBinding& binding, int max_extra) {
    if (!is_scroll_run(actions, cursor.run_start)) {
        throw std::invalid_argument("adapt_scroll: no scroll run followed by a targeted action");
    }
    std::size_t target_at = cursor.run_start;
    while (actions[target_at].kind == ActionKind::scroll) ++target_at;
    const int stored = static_cast<int>(target_at - cursor.run_start);

    try {
        return {apply(actions[target_at], rep, binding), true, target_at + 1};
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::AdaptationFailed) throw;
    }
    if (cursor.scrolls_done >= stored + max_extra) {
        throw Error(ErrorKind::AdaptationFailed, "target not found after " + std::to_string(cursor.scrolls_done) + " scrolls");
    }
    std::size_t which = cursor.run_start + static_cast<std::size_t>(std::min(cursor.scrolls_done, stored - 1));
    Action scroll = apply(actions[which], rep, binding);
    ++cursor.scrolls_done;
    return {scroll, false, target_at};
}

PastExample past_example(const memory::SubTaskEdge& edge, std::size_t action_index) {
    if (!edge.example || action_index >= edge.example->steps.size()) {
        throw Error(ErrorKind::MissingExample,
                    "no worked example for action " + std::to_string(action_index) + " of '" + edge.sub_task_name + "'");
    }
    const auto& step = edge.example->steps[action_index];
    PastExample p;
    p.instruction = edge.example->instruction;
    p.binding = edge.example->binding;
    p.action = step.action;
    auto past = layout::parse_screen(step.screen);
    std::set<int> keep;
    if (step.action.ui_index && past.contains(*step.action.ui_index)) keep.insert(*step.action.ui_index);
    p.screen_excerpt = layout::serialize_excerpt(past, keep);
    return p;
}

llm::LlmRequest build_incontext_prompt(const memory::SubTask& sub_task, const PastExample& past,
                                       const std::string& instruction, const layout::ScreenRepresentation& rep,
                                       const ParameterBinding& binding, const std::string& feedback) {
    llm::PromptVars vars{
        {"example_instruction", past.instruction},
        {"sub_task", sub_task.name + ": " + sub_task.description},
        {"example_parameters", llm::serialize(past.binding)},
        {"example_screen", past.screen_excerpt},
        {"example_action", action_json(past.action)},
        {"instruction", instruction},
        {"parameters", llm::serialize(binding)},
        {"screen", rep.serialized()},
        {"feedback", feedback},
    };
    return llm::PromptRegistry::builtin().render("adapt", vars);
}

}  // namespace taskmem::adapt

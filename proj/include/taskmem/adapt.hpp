#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "taskmem/action.hpp"
#include "taskmem/layout.hpp"
#include "taskmem/llm.hpp"
#include "taskmem/memory.hpp"

namespace taskmem::adapt {

inline constexpr int kMaxExtraScrolls = 5;

// Key attributes of an element: id, text, description, class; non-empty only.
UiSignature signature_of(const layout::HtmlElement& el);

// Replaces the target index with the element's key attributes, then every
// attribute equal (case-insensitively, whole string) to a bound parameter
// value with "[param]"; input text is parameterized only on an exact match.
// The first parameter in binding order wins.
//
// strict: the result must apply back to the same action on `rep`, otherwise
// GeneralizationFailed (e.g. the target is indistinguishable from a sibling).
GeneralizedAction generalize(const Action& action, const layout::ScreenRepresentation& rep,
                             const ParameterBinding& binding, bool strict = true);

// Substitutes parameter values and resolves the target on `rep`. Substituted
// fields compare case-insensitively, literal fields exactly. Several matches
// resolve to the lowest index when the signature carries text and fail
// otherwise. Throws UnboundParameter or AdaptationFailed.
Action apply(const GeneralizedAction& gen, const layout::ScreenRepresentation& rep, const ParameterBinding& binding);

// Position inside a stored action list that starts with a run of scrolls.
struct ScrollCursor {
    std::size_t run_start = 0;
    int scrolls_done = 0;
};

struct ScrollStep {
    Action action;
    // true when `action` is the targeted action after the run; the caller
    // continues at next_index.
    bool reached_target = false;
    std::size_t next_index = 0;
};

// Skips the remaining stored scrolls once the following action's target is on
// screen. Otherwise returns the next stored scroll, then repeats the last one
// up to max_extra times, then throws AdaptationFailed. Increments
// cursor.scrolls_done when a scroll is returned.
ScrollStep adapt_scroll(const std::vector<GeneralizedAction>& actions, ScrollCursor& cursor,
                        const layout::ScreenRepresentation& rep, const ParameterBinding& binding,
                        int max_extra = kMaxExtraScrolls);

// True when actions[at] starts a scroll run that is followed by a targeted action.
bool is_scroll_run(const std::vector<GeneralizedAction>& actions, std::size_t at);

struct PastExample {
    std::string instruction;
    ParameterBinding binding;
    std::string screen_excerpt;  // target element and its ancestors
    Action action;
};

// The worked example for actions[action_index] of an edge. Throws MissingExample.
PastExample past_example(const memory::SubTaskEdge& edge, std::size_t action_index);

// One worked example followed by the current case, rendered from the "adapt"
// template. The example action is quoted verbatim in the derived-action format.
llm::LlmRequest build_incontext_prompt(const memory::SubTask& sub_task, const PastExample& past,
                                       const std::string& instruction, const layout::ScreenRepresentation& rep,
                                       const ParameterBinding& binding, const std::string& feedback = {});

}  // namespace taskmem::adapt

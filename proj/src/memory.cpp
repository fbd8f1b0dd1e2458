#include "taskmem/memory.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "taskmem/error.hpp"
#include "taskmem/text.hpp"

namespace taskmem::memory {

namespace {

void placeholder_problems(const SubTask& st, const SubTaskEdge& e, std::vector<std::string>& out) {
    auto check = [&](const std::optional<std::string>& v) {
        if (!v) return;
        for (const auto& p : text::placeholders_in(*v)) {
            if (!st.has_parameter(p)) {
                out.push_back("edge (" + std::to_string(e.from_node) + "," + e.sub_task_name +
                              ") uses undeclared parameter [" + p + "]");
            }
        }
    };
    for (const auto& a : e.actions) {
        check(a.text_template);
        if (a.target) {
            check(a.target->id);
            check(a.target->text);
            check(a.target->description);
            check(a.target->cls);
        }
    }
}

Json params_to_json(const ParamList& params) {
    Json arr = Json::array();
    for (const auto& [n, d] : params) arr.push_back({{"name", n}, {"description", d}});
    return arr;
}

ParamList params_from_json(const Json& j) {
    ParamList out;
    for (const auto& p : j) out.emplace_back(p.at("name").get<std::string>(), p.value("description", ""));
    return out;
}

Json sub_task_to_json(const SubTask& st) {
    return {{"name", st.name},
            {"description", st.description},
            {"parameters", params_to_json(st.parameters)},
            {"key_ui_refs", st.key_ui_refs}};
}

SubTask sub_task_from_json(const Json& j) {
    SubTask st;
    st.name = j.at("name").get<std::string>();
    st.description = j.value("description", "");
    st.parameters = params_from_json(j.value("parameters", Json::array()));
    st.key_ui_refs = j.value("key_ui_refs", Json::array()).get<std::vector<UiSignature>>();
    return st;
}

Json example_to_json(const EdgeExample& ex) {
    Json steps = Json::array();
    for (const auto& s : ex.steps) steps.push_back({{"screen", s.screen}, {"action", s.action}});
    return {{"instruction", ex.instruction}, {"binding", binding_to_json(ex.binding)}, {"steps", steps}};
}

EdgeExample example_from_json(const Json& j) {
    EdgeExample ex;
    ex.instruction = j.at("instruction").get<std::string>();
    ex.binding = binding_from_json(j.value("binding", Json::object()));
    for (const auto& s : j.at("steps")) ex.steps.push_back({s.at("screen").get<std::string>(), s.at("action").get<Action>()});
    return ex;
}

void require_unique_names(const std::vector<SubTask>& sub_tasks) {
    std::set<std::string> seen;
    for (const auto& st : sub_tasks) {
        if (st.name.empty()) throw Error(ErrorKind::IntegrityViolation, "sub-task name must be non-empty");
        if (!seen.insert(st.name).second) {
            throw Error(ErrorKind::DuplicateSubTaskName, "duplicate sub-task name '" + st.name + "'");
        }
    }
}

}  // namespace

bool SubTask::has_parameter(std::string_view param) const {
    return std::any_of(parameters.begin(), parameters.end(), [&](const auto& p) { return p.first == param; });
}

bool is_global_sub_task(std::string_view name) { return name == kReadScreen || name == kFinish || name == kAskUser; }

const std::vector<SubTask>& global_sub_tasks() {
    static const std::vector<SubTask> globals = {
        {std::string(kReadScreen), "Answer the user's question from the current screen content",
         {{"question", "what the user wants to know"}}, {}},
        {std::string(kFinish), "Indicate that the instruction has been completed", {}, {}},
        {std::string(kAskUser), "Ask the user for information the instruction does not provide",
         {{"question", "what to ask the user"}}, {}},
    };
    return globals;
}

const SubTask* PageNode::find(std::string_view name) const {
    for (const auto& st : sub_tasks) {
        if (st.name == name) return &st;
    }
    return nullptr;
}

std::string_view to_string(Provenance p) { return p == Provenance::user_repaired ? "user_repaired" : "llm_derived"; }

std::string normalize_task_name(std::string_view name) { return text::normalize_phrase(name); }

std::vector<std::string> integrity_problems(const MemoryData& data) {
    std::vector<std::string> out;
    for (const auto& [id, node] : data.nodes) {
        if (node.node_id != id) out.push_back("node key " + std::to_string(id) + " disagrees with node_id");
        std::set<std::string> names;
        for (const auto& st : node.sub_tasks) {
            if (st.name.empty()) out.push_back("node " + std::to_string(id) + " has an unnamed sub-task");
            if (!names.insert(st.name).second) {
                out.push_back("node " + std::to_string(id) + " repeats sub-task '" + st.name + "'");
            }
            if (st.key_ui_refs.empty() && !is_global_sub_task(st.name)) {
                out.push_back("sub-task '" + st.name + "' on node " + std::to_string(id) + " has no key UI");
            }
            std::set<std::string> params;
            for (const auto& [p, _] : st.parameters) {
                if (!params.insert(p).second) out.push_back("sub-task '" + st.name + "' repeats parameter " + p);
            }
        }
        if (node.example_screens.size() > kMaxExampleScreens) {
            out.push_back("node " + std::to_string(id) + " keeps too many example screens");
        }
    }
    for (const auto& [key, e] : data.edges) {
        std::string label = "edge (" + std::to_string(key.first) + "," + key.second + ")";
        if (e.from_node != key.first || e.sub_task_name != key.second) out.push_back(label + " disagrees with its key");
        auto from = data.nodes.find(e.from_node);
        if (from == data.nodes.end()) {
            out.push_back(label + " starts at missing node");
            continue;
        }
        const SubTask* st = from->second.find(e.sub_task_name);
        if (st == nullptr && !is_global_sub_task(e.sub_task_name)) {
            out.push_back(label + " names an undeclared sub-task");
        }
        if (e.to_node && !data.nodes.contains(*e.to_node)) out.push_back(label + " ends at missing node");
        if (e.actions.empty() && !is_global_sub_task(e.sub_task_name)) out.push_back(label + " has no actions");
        if (st != nullptr) placeholder_problems(*st, e, out);
    }
    for (const auto& [name, task] : data.tasks) {
        if (task.task_name != name) out.push_back("task key '" + name + "' disagrees with task_name");
        if (task.steps.empty() || task.steps.back().sub_task_name != kFinish) {
            out.push_back("task '" + name + "' does not end with Finish");
        }
        for (const auto& step : task.steps) {
            if (is_global_sub_task(step.sub_task_name)) continue;
            if (!data.edges.contains({step.node_id, step.sub_task_name})) {
                out.push_back("task '" + name + "' steps through missing edge (" + std::to_string(step.node_id) + "," +
                              step.sub_task_name + ")");
            }
        }
    }
    return out;
}

AppMemory::AppMemory(std::string app_id) { data_.app_id = std::move(app_id); }

AppMemory::AppMemory(MemoryData data) : data_(std::move(data)) {
    auto problems = integrity_problems(data_);
    if (!problems.empty()) throw Error(ErrorKind::IntegrityViolation, problems.front());
}

AppMemory::AppMemory(const AppMemory& other) : data_(other.snapshot()) {}

AppMemory& AppMemory::operator=(const AppMemory& other) {
    if (this != &other) {
        auto copy = other.snapshot();
        std::unique_lock lock(mutex_);
        data_ = std::move(copy);
    }
    return *this;
}

MemoryData AppMemory::snapshot() const {
    std::shared_lock lock(mutex_);
    return data_;
}

std::string AppMemory::app_id() const {
    std::shared_lock lock(mutex_);
    return data_.app_id;
}

std::size_t AppMemory::node_count() const {
    std::shared_lock lock(mutex_);
    return data_.nodes.size();
}

std::size_t AppMemory::edge_count() const {
    std::shared_lock lock(mutex_);
    return data_.edges.size();
}

void AppMemory::check_or_rollback(const MemoryData& before) {
    auto problems = integrity_problems(data_);
    if (!problems.empty()) {
        data_ = before;
        throw Error(ErrorKind::IntegrityViolation, problems.front());
    }
}

NodeId AppMemory::add_node(std::vector<SubTask> sub_tasks, const layout::ScreenRepresentation& screen) {
    require_unique_names(sub_tasks);
    std::unique_lock lock(mutex_);
    auto before = data_;
    NodeId id = data_.nodes.empty() ? 0 : data_.nodes.rbegin()->first + 1;
    PageNode node;
    node.node_id = id;
    node.sub_tasks = std::move(sub_tasks);
    if (!screen.empty()) node.example_screens.push_back(screen.serialized());
    data_.nodes.emplace(id, std::move(node));
    check_or_rollback(before);
    return id;
}

void AppMemory::merge_sub_tasks(NodeId id, const std::vector<SubTask>& sub_tasks) {
    require_unique_names(sub_tasks);
    std::unique_lock lock(mutex_);
    auto it = data_.nodes.find(id);
    if (it == data_.nodes.end()) throw Error(ErrorKind::UnknownNode, "node " + std::to_string(id));
    auto before = data_;
    for (const auto& st : sub_tasks) {
        if (it->second.find(st.name) == nullptr) it->second.sub_tasks.push_back(st);
    }
    check_or_rollback(before);
}

void AppMemory::add_sub_task(NodeId id, SubTask sub_task) {
    std::unique_lock lock(mutex_);
    auto it = data_.nodes.find(id);
    if (it == data_.nodes.end()) throw Error(ErrorKind::UnknownNode, "node " + std::to_string(id));
    if (it->second.find(sub_task.name) != nullptr) {
        throw Error(ErrorKind::DuplicateSubTaskName, "node " + std::to_string(id) + " already has '" + sub_task.name + "'");
    }
    auto before = data_;
    it->second.sub_tasks.push_back(std::move(sub_task));
    check_or_rollback(before);
}

void AppMemory::remove_sub_task(NodeId id, std::string_view name) {
    std::unique_lock lock(mutex_);
    auto it = data_.nodes.find(id);
    if (it == data_.nodes.end()) throw Error(ErrorKind::UnknownNode, "node " + std::to_string(id));
    auto& subs = it->second.sub_tasks;
    auto pos = std::find_if(subs.begin(), subs.end(), [&](const SubTask& st) { return st.name == name; });
    if (pos == subs.end()) throw Error(ErrorKind::UnknownSubTask, std::string(name));
    subs.erase(pos);
    data_.edges.erase({id, std::string(name)});
    std::erase_if(data_.tasks, [&](const auto& kv) {
        return std::any_of(kv.second.steps.begin(), kv.second.steps.end(),
                           [&](const TaskStep& s) { return s.node_id == id && s.sub_task_name == name; });
    });
}

void AppMemory::add_example_screen(NodeId id, std::string serialized) {
    std::unique_lock lock(mutex_);
    auto it = data_.nodes.find(id);
    if (it == data_.nodes.end()) throw Error(ErrorKind::UnknownNode, "node " + std::to_string(id));
    auto& screens = it->second.example_screens;
    if (std::find(screens.begin(), screens.end(), serialized) != screens.end()) return;
    screens.push_back(std::move(serialized));
    while (screens.size() > kMaxExampleScreens) screens.erase(screens.begin());
}

void AppMemory::record_edge(NodeId from, std::string_view sub_task_name, EdgeWrite write) {
    std::unique_lock lock(mutex_);
    auto it = data_.nodes.find(from);
    if (it == data_.nodes.end()) throw Error(ErrorKind::UnknownNode, "node " + std::to_string(from));
    if (it->second.find(sub_task_name) == nullptr) {
        throw Error(ErrorKind::UnknownSubTask,
                    "node " + std::to_string(from) + " does not declare '" + std::string(sub_task_name) + "'");
    }
    EdgeKey key{from, std::string(sub_task_name)};
    if (auto existing = data_.edges.find(key); existing != data_.edges.end()) {
        if (existing->second.provenance == Provenance::user_repaired && write.provenance == Provenance::llm_derived) {
            throw Error(ErrorKind::RepairOverwriteDenied,
                        "edge (" + std::to_string(from) + "," + key.second + ") was repaired by the user");
        }
        if (write.provenance == Provenance::llm_derived && !write.overwrite) {
            throw Error(ErrorKind::OverwriteDenied,
                        "edge (" + std::to_string(from) + "," + key.second + ") exists; pass overwrite to replace it");
        }
    }
    auto before = data_;
    SubTaskEdge edge;
    edge.from_node = from;
    edge.sub_task_name = key.second;
    edge.actions = std::move(write.actions);
    edge.to_node = write.to_node;
    edge.provenance = write.provenance;
    edge.example = std::move(write.example);
    data_.edges[key] = std::move(edge);
    check_or_rollback(before);
}

void AppMemory::set_edge_target(NodeId from, std::string_view sub_task_name, NodeId to) {
    std::unique_lock lock(mutex_);
    auto it = data_.edges.find({from, std::string(sub_task_name)});
    if (it == data_.edges.end()) throw Error(ErrorKind::UnknownSubTask, "no edge (" + std::to_string(from) + "," + std::string(sub_task_name) + ")");
    if (!data_.nodes.contains(to)) throw Error(ErrorKind::UnknownNode, "node " + std::to_string(to));
    it->second.to_node = to;
}

void AppMemory::record_task(std::string_view task_name, ParamList parameter_schema, std::vector<TaskStep> steps) {
    auto name = normalize_task_name(task_name);
    if (name.empty()) throw Error(ErrorKind::DanglingStep, "task name must be non-empty");
    if (steps.empty() || steps.back().sub_task_name != kFinish) {
        throw Error(ErrorKind::DanglingStep, "task '" + name + "' must end with Finish");
    }
    std::unique_lock lock(mutex_);
    for (const auto& s : steps) {
        if (is_global_sub_task(s.sub_task_name)) continue;
        if (!data_.edges.contains({s.node_id, s.sub_task_name})) {
            throw Error(ErrorKind::DanglingStep, "no edge (" + std::to_string(s.node_id) + "," + s.sub_task_name + ")");
        }
    }
    data_.tasks[name] = TaskRecord{name, std::move(parameter_schema), std::move(steps)};
}

std::optional<TaskRecord> AppMemory::lookup_task(std::string_view task_name) const {
    std::shared_lock lock(mutex_);
    auto it = data_.tasks.find(normalize_task_name(task_name));
    if (it == data_.tasks.end()) return std::nullopt;
    return it->second;
}

std::optional<SubTaskEdge> AppMemory::find_edge(NodeId from, std::string_view sub_task_name) const {
    std::shared_lock lock(mutex_);
    auto it = data_.edges.find({from, std::string(sub_task_name)});
    if (it == data_.edges.end()) return std::nullopt;
    return it->second;
}

std::optional<PageNode> AppMemory::node(NodeId id) const {
    std::shared_lock lock(mutex_);
    auto it = data_.nodes.find(id);
    if (it == data_.nodes.end()) return std::nullopt;
    return it->second;
}

Json to_json(const MemoryData& data) {
    Json nodes = Json::array();
    for (const auto& [id, node] : data.nodes) {
        Json subs = Json::array();
        for (const auto& st : node.sub_tasks) subs.push_back(sub_task_to_json(st));
        nodes.push_back({{"node_id", id}, {"sub_tasks", subs}, {"example_screens", node.example_screens}});
    }
    Json edges = Json::array();
    for (const auto& [key, e] : data.edges) {
        Json je = {{"from_node", e.from_node},
                   {"sub_task", e.sub_task_name},
                   {"actions", e.actions},
                   {"to_node", e.to_node ? Json(*e.to_node) : Json(nullptr)},
                   {"provenance", std::string(to_string(e.provenance))}};
        if (e.example) je["example"] = example_to_json(*e.example);
        edges.push_back(std::move(je));
    }
    Json tasks = Json::array();
    for (const auto& [name, t] : data.tasks) {
        Json steps = Json::array();
        for (const auto& s : t.steps) {
            steps.push_back({{"node_id", s.node_id}, {"sub_task", s.sub_task_name}, {"parameters", s.parameter_names}});
        }
        tasks.push_back({{"task_name", t.task_name}, {"parameters", params_to_json(t.parameter_schema)}, {"steps", steps}});
    }
    return {{"version", data.version}, {"app_id", data.app_id}, {"nodes", nodes}, {"edges", edges}, {"tasks", tasks}};
}

MemoryData memory_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("version")) throw Error(ErrorKind::IntegrityViolation, "memory file lacks 'version'");
    if (!j.at("version").is_number_integer() || j.at("version").get<int>() != kSchemaVersion) {
        throw Error(ErrorKind::SchemaVersionMismatch,
                    "memory schema " + j.at("version").dump() + ", expected " + std::to_string(kSchemaVersion));
    }
    MemoryData data;
    try {
        data.version = kSchemaVersion;
        data.app_id = j.at("app_id").get<std::string>();
        for (const auto& jn : j.at("nodes")) {
            PageNode node;
            node.node_id = jn.at("node_id").get<NodeId>();
            for (const auto& js : jn.at("sub_tasks")) node.sub_tasks.push_back(sub_task_from_json(js));
            node.example_screens = jn.value("example_screens", std::vector<std::string>{});
            if (!data.nodes.emplace(node.node_id, node).second) {
                throw Error(ErrorKind::IntegrityViolation, "duplicate node_id " + std::to_string(node.node_id));
            }
        }
        for (const auto& je : j.at("edges")) {
            SubTaskEdge e;
            e.from_node = je.at("from_node").get<NodeId>();
            e.sub_task_name = je.at("sub_task").get<std::string>();
            e.actions = je.at("actions").get<std::vector<GeneralizedAction>>();
            if (je.contains("to_node") && !je.at("to_node").is_null()) e.to_node = je.at("to_node").get<NodeId>();
            auto prov = je.value("provenance", "llm_derived");
            if (prov != "llm_derived" && prov != "user_repaired") {
                throw Error(ErrorKind::IntegrityViolation, "unknown provenance '" + prov + "'");
            }
            e.provenance = prov == "user_repaired" ? Provenance::user_repaired : Provenance::llm_derived;
            if (je.contains("example")) e.example = example_from_json(je.at("example"));
            EdgeKey key{e.from_node, e.sub_task_name};
            if (!data.edges.emplace(key, std::move(e)).second) {
                throw Error(ErrorKind::IntegrityViolation, "duplicate edge (" + std::to_string(key.first) + "," + key.second + ")");
            }
        }
        for (const auto& jt : j.at("tasks")) {
            TaskRecord t;
            t.task_name = jt.at("task_name").get<std::string>();
            t.parameter_schema = params_from_json(jt.value("parameters", Json::array()));
            for (const auto& js : jt.at("steps")) {
                t.steps.push_back({js.at("node_id").get<NodeId>(), js.at("sub_task").get<std::string>(),
                                   js.value("parameters", std::vector<std::string>{})});
            }
            data.tasks.emplace(t.task_name, std::move(t));
        }
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::IntegrityViolation, e.what());
    } catch (const std::invalid_argument& e) {
        throw Error(ErrorKind::IntegrityViolation, e.what());
    }
    auto problems = integrity_problems(data);
    if (!problems.empty()) throw Error(ErrorKind::IntegrityViolation, problems.front());
    return data;
}

void save(const AppMemory& mem, const std::filesystem::path& path) {
    auto text = to_json(mem.snapshot()).dump(2) + "\n";
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::IoError, "cannot write " + tmp.string());
        out << text;
        if (!out) throw Error(ErrorKind::IoError, "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot replace " + path.string() + ": " + ec.message());
}

AppMemory load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    Json j;
    try {
        j = Json::parse(buf.str());
    } catch (const Json::parse_error& e) {
        throw Error(ErrorKind::IntegrityViolation, std::string("unparsable memory file: ") + e.what());
    }
    return AppMemory(memory_from_json(j));
}

std::filesystem::path memory_path(const std::filesystem::path& dir, std::string_view app_id) {
    return dir / (std::string(app_id) + ".memory.json");
}

}  // namespace taskmem::memory

#include "overgen/prompt/template.hpp"

#include <fstream>
#include <numeric>
#include <sstream>

#include "overgen/builtin_templates.hpp"
#include "overgen/error.hpp"

namespace overgen::prompt {

std::string_view to_string(TemplateId id) {
    return id == TemplateId::nli_qa_style ? "nli_qa_style" : "mcqa_style";
}

TemplateId parse_template_id(std::string_view text) {
    if (text == "nli_qa_style") return TemplateId::nli_qa_style;
    if (text == "mcqa_style") return TemplateId::mcqa_style;
    throw PreconditionError("unknown template '" + std::string(text) + "'");
}

std::vector<std::size_t> identity_order(std::size_t n) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    return order;
}

std::string format_choices(std::span<const std::string> choices, std::span<const std::size_t> order) {
    if (order.size() != choices.size()) throw PreconditionError("choice order is not a permutation of the choices");
    std::vector<bool> seen(choices.size(), false);
    std::string out;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (order[i] >= choices.size() || seen[order[i]])
            throw PreconditionError("choice order is not a permutation of the choices");
        seen[order[i]] = true;
        if (i > 0) out += (i + 1 == order.size()) ? ", or " : ", ";
        out += choices[order[i]];
    }
    return out;
}

namespace {

std::string unescape(const std::string& line) {
    std::string out;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '\\' && i + 1 < line.size()) {
            char next = line[++i];
            if (next == 'n') out.push_back('\n');
            else if (next == 't') out.push_back('\t');
            else out.push_back(next);
        } else {
            out.push_back(line[i]);
        }
    }
    return out;
}

bool known_placeholder(std::string_view name) {
    return name == "premise" || name == "hypothesis" || name == "question" || name == "choices" ||
           name == "label" || name == "explanation";
}

void check_placeholders(const std::string& body, const std::string& source) {
    for (std::size_t pos = body.find('{'); pos != std::string::npos; pos = body.find('{', pos + 1)) {
        auto close = body.find('}', pos);
        if (close == std::string::npos) throw ParseError(source, 0, "unclosed placeholder");
        auto name = std::string_view(body).substr(pos + 1, close - pos - 1);
        if (!known_placeholder(name)) throw ParseError(source, 0, "unknown placeholder {" + std::string(name) + "}");
    }
}

}  // namespace

PromptTemplate PromptTemplate::parse(std::string_view text, const std::string& source) {
    PromptTemplate t;
    std::map<std::string, std::vector<std::string>> sections;
    std::string current;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.starts_with("%")) {
            std::istringstream directive(line.substr(1));
            std::string keyword;
            directive >> keyword;
            if (keyword == "template") directive >> t.name_ >> t.version_;
            continue;
        }
        if (line.size() > 2 && line.front() == '[' && line.back() == ']') {
            current = line.substr(1, line.size() - 2);
            if (sections.count(current)) throw ParseError(source, line_no, "duplicate section [" + current + "]");
            sections[current];
            continue;
        }
        if (current.empty()) {
            if (line.empty()) continue;
            throw ParseError(source, line_no, "text outside of a section");
        }
        sections[current].push_back(line);
    }

    auto body = [&](const char* name, bool required) {
        auto it = sections.find(name);
        if (it == sections.end()) {
            if (required) throw ParseError(source, 0, std::string("missing section [") + name + "]");
            return std::string();
        }
        std::string joined;
        for (std::size_t i = 0; i < it->second.size(); ++i) {
            if (i) joined.push_back('\n');
            joined += it->second[i];
        }
        check_placeholders(joined, source);
        return joined;
    };

    if (t.name_.empty()) throw ParseError(source, 1, "missing %template directive");
    t.header_ = body("header", true);
    t.example_ = body("example", true);
    t.target_ = body("target", true);
    t.label_example_ = body("label_example", false);
    t.label_target_ = body("label_target", false);
    t.separator_ = body("separator", true);
    if (auto it = sections.find("labels"); it != sections.end()) {
        for (const auto& entry : it->second) {
            auto eq = entry.find('=');
            if (eq == std::string::npos) throw ParseError(source, 0, "label mapping without '='");
            t.label_words_[entry.substr(0, eq)] = entry.substr(eq + 1);
        }
    }
    if (auto it = sections.find("stop"); it != sections.end()) {
        for (const auto& entry : it->second) t.stops_.push_back(unescape(entry));
    }
    return t;
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open template '" + path.string() + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse(text.str(), path.string());
}

const PromptTemplate& PromptTemplate::builtin(TemplateId id) {
    static const PromptTemplate nli = parse(builtin::kNliQaStyle, "builtin:nli_qa_style");
    static const PromptTemplate mcqa = parse(builtin::kMcqaStyle, "builtin:mcqa_style");
    return id == TemplateId::nli_qa_style ? nli : mcqa;
}

std::string PromptTemplate::label_word(const std::string& gold_label) const {
    auto it = label_words_.find(gold_label);
    return it == label_words_.end() ? gold_label : it->second;
}

std::string PromptTemplate::fill(const std::string& body, const TaskInstance& instance,
                                 std::span<const std::size_t> order, const std::string* explanation) const {
    std::string out;
    out.reserve(body.size() + 256);
    std::size_t pos = 0;
    while (pos < body.size()) {
        auto open = body.find('{', pos);
        if (open == std::string::npos) {
            out.append(body, pos);
            break;
        }
        out.append(body, pos, open - pos);
        auto close = body.find('}', open);
        auto name = std::string_view(body).substr(open + 1, close - open - 1);
        if (name == "premise") out += instance.premise;
        else if (name == "hypothesis") out += instance.hypothesis;
        else if (name == "question") out += instance.question;
        else if (name == "choices") out += format_choices(instance.choices, order);
        else if (name == "label") out += label_word(instance.gold_label);
        else if (name == "explanation") {
            if (!explanation) throw PreconditionError("template block needs an explanation");
            out += *explanation;
        }
        pos = close + 1;
    }
    return out;
}

std::string PromptTemplate::render_example(const PromptExample& example, std::span<const std::size_t> order) const {
    return fill(example_, example.instance, order, &example.explanation);
}

std::string PromptTemplate::render_target(const TaskInstance& target, std::span<const std::size_t> order) const {
    return fill(target_, target, order, nullptr);
}

std::string PromptTemplate::render_label_example(const TaskInstance& example, std::span<const std::size_t> order) const {
    if (label_example_.empty()) throw PreconditionError("template " + name_ + " has no label-prediction blocks");
    return fill(label_example_, example, order, nullptr);
}

std::string PromptTemplate::render_label_target(const TaskInstance& target, std::span<const std::size_t> order) const {
    if (label_target_.empty()) throw PreconditionError("template " + name_ + " has no label-prediction blocks");
    return fill(label_target_, target, order, nullptr);
}

std::string PromptTemplate::join(std::span<const std::string> blocks) const {
    std::string out = header_;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        out.push_back('\n');
        if (i > 0) {
            out += separator_;
            out.push_back('\n');
        }
        out += blocks[i];
    }
    return out;
}

namespace {

void require_task(const TaskInstance& instance, Task task) {
    if (instance.task != task)
        throw PreconditionError("instance " + instance.id + " is not a " + std::string(to_string(task)) + " instance");
}

}  // namespace

std::string render_nli_example(const PromptExample& example) {
    require_task(example.instance, Task::nli);
    return PromptTemplate::builtin(TemplateId::nli_qa_style).render_example(example, {});
}

std::string render_nli_target(const TaskInstance& target) {
    require_task(target, Task::nli);
    return PromptTemplate::builtin(TemplateId::nli_qa_style).render_target(target, {});
}

std::string render_mcqa_example(const PromptExample& example, std::span<const std::size_t> choice_order) {
    require_task(example.instance, Task::mcqa);
    return PromptTemplate::builtin(TemplateId::mcqa_style).render_example(example, choice_order);
}

std::string render_mcqa_target(const TaskInstance& target, std::span<const std::size_t> choice_order) {
    require_task(target, Task::mcqa);
    return PromptTemplate::builtin(TemplateId::mcqa_style).render_target(target, choice_order);
}

}  // namespace overgen::prompt

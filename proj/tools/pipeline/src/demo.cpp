#include "overgen/pipeline/demo.hpp"

#include <array>
#include <cctype>
#include <fstream>
#include <vector>

#include "overgen/random.hpp"
#include "overgen/serialization.hpp"

namespace overgen::pipeline {

namespace {

constexpr std::array<std::string_view, 24> kObjects{
    "spoon",   "pillow",  "stapler", "shovel", "towel",   "kettle", "notebook", "hammer",
    "blanket", "ladder",  "toaster", "rake",   "candle",  "bucket", "sponge",   "wrench",
    "lamp",    "blender", "mop",     "drill",  "teapot",  "quilt",  "hose",     "broom"};
constexpr std::array<std::string_view, 8> kPlaces{"kitchen", "bedroom", "office", "garage",
                                                  "bathroom", "garden", "attic",  "basement"};
constexpr std::array<std::string_view, 6> kQuestionForms{
    "Where would you most likely find a {}?",    "Where is a {} usually kept?",
    "Where would someone put away a {}?",        "Which room is the usual home of a {}?",
    "Where would you look first for a {}?",      "Where does a {} typically belong?"};
constexpr std::array<std::string_view, 6> kReasons{
    "that is where people use it every day", "it is needed for chores done there",
    "it is stored close to where it is used", "that room has space set aside for it",
    "people keep tools near their work",      "it helps with the tasks in that room"};
constexpr std::array<std::string_view, 6> kFlat{
    "A {} is a common household item.",  "The {} is a thing.",
    "Many homes have a {} somewhere.",   "A {} can be bought in a store.",
    "The {} is an object.",              "Some people own a {}."};

std::string fill(std::string_view form, std::string_view word) {
    std::string out(form);
    auto pos = out.find("{}");
    if (pos != std::string::npos) out.replace(pos, 2, word);
    return out;
}

/// Text after the last occurrence of `key` up to the end of that line.
std::string last_line_after(const std::string& text, std::string_view key) {
    auto pos = text.rfind(key);
    if (pos == std::string::npos) return {};
    pos += key.size();
    auto end = text.find('\n', pos);
    return text.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
}

/// Longest word of the question, a cheap stand-in for its topic.
std::string topic_of(const std::string& question) {
    std::string best, word;
    for (char c : question + " ") {
        if (std::isalpha(static_cast<unsigned char>(c))) {
            word += c;
        } else {
            if (word.size() > best.size()) best = word;
            word.clear();
        }
    }
    return best.empty() ? "it" : best;
}

std::vector<std::string> split_choices(std::string line) {
    while (!line.empty() && (line.back() == '?' || line.back() == ' ')) line.pop_back();
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= line.size()) {
        auto comma = line.find(", ", start);
        std::string part = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (part.rfind("or ", 0) == 0) part = part.substr(3);
        if (!part.empty()) out.push_back(part);
        if (comma == std::string::npos) break;
        start = comma + 2;
    }
    return out;
}

}  // namespace

gen::MockCompletionClient::Responder demo_responder(DemoResponderConfig config) {
    return [config](const gen::CompletionRequest& req) -> std::string {
        Rng rng = Rng::derive(config.seed, req.seed_tag + '\x1f' + req.prompt_text);
        const auto& prompt = req.prompt_text;
        std::string tail = prompt.substr(prompt.size() > 8 ? prompt.size() - 8 : 0);
        while (!tail.empty() && std::isspace(static_cast<unsigned char>(tail.back()))) tail.pop_back();
        if (!tail.ends_with("why?")) {
            // Label prompt: the target block's last "?"-terminated line lists the choices.
            auto pos = prompt.rfind('?', prompt.size() - 1);
            auto line_start = prompt.rfind('\n', pos == std::string::npos ? 0 : pos);
            auto line = prompt.substr(line_start == std::string::npos ? 0 : line_start + 1);
            auto choices = split_choices(line.substr(0, line.find('\n')));
            if (choices.empty()) return "unknown";
            return choices[rng.uniform_index(choices.size())] + "\n";
        }
        const std::string question = last_line_after(prompt, "question: ");
        const std::string topic = topic_of(question);
        const double rate = req.is_greedy() ? config.greedy_marker_rate : config.sample_marker_rate;
        std::string text;
        if (rng.bernoulli(rate)) {
            text = "The " + topic + " goes there " + config.marker + " " +
                   std::string(kReasons[rng.uniform_index(kReasons.size())]) + ".";
        } else {
            text = fill(kFlat[rng.uniform_index(kFlat.size())], topic);
        }
        return " " + text + "\n###";
    };
}

std::filesystem::path write_demo_project(const std::filesystem::path& dir, const DemoProjectOptions& options) {
    std::filesystem::create_directories(dir / "data");
    Rng rng(derive_seed(options.seed, "demo-project"));

    auto make_instance = [&](const std::string& id, Split split) {
        TaskInstance inst;
        inst.id = id;
        inst.task = Task::mcqa;
        const auto object = kObjects[rng.uniform_index(kObjects.size())];
        inst.question = fill(kQuestionForms[rng.uniform_index(kQuestionForms.size())], object);
        std::vector<std::string_view> places(kPlaces.begin(), kPlaces.end());
        rng.shuffle(std::span<std::string_view>(places));
        for (std::size_t c = 0; c < 5; ++c) inst.choices.emplace_back(places[c]);
        inst.gold_label = inst.choices[rng.uniform_index(inst.choices.size())];
        inst.split = split;
        return inst;
    };

    std::vector<TaskInstance> instances;
    for (std::size_t i = 0; i < options.n_instances; ++i) {
        const Split split = i % 5 < 3 ? Split::train : (i % 5 == 3 ? Split::dev : Split::test);
        instances.push_back(make_instance("q" + std::to_string(i), split));
    }
    std::vector<PromptExample> pool;
    for (std::size_t i = 0; i < options.pool_size; ++i) {
        auto inst = make_instance("pool" + std::to_string(i), Split::train);
        const auto reason = kReasons[rng.uniform_index(kReasons.size())];
        pool.push_back({inst, "People keep it in the " + inst.gold_label + " because " + std::string(reason) + "."});
    }
    jsonl::write_records(dir / "data" / "instances.jsonl", entity::instances, instances);
    jsonl::write_records(dir / "data" / "pool.jsonl", entity::prompt_pool, pool);

    const auto config = dir / "config.toml";
    std::ofstream out(config, std::ios::trunc);
    out << "experiment = \"" << options.experiment << "\"\n"
        << "seed = " << options.seed << "\n\n"
        << "[data]\ntask = \"mcqa\"\ncorpus = \"data/instances.jsonl\"\nprompt_pool = \"data/pool.jsonl\"\n\n"
        << "[endpoint]\nkind = \"mock\"\n\n"
        << "[annotation]\nplanted_marker = \"because\"\nsynthetic_annotators = 5\nsynthetic_error_rate = 0.1\n\n"
        << "[filter]\nbackend = \"builtin\"\nmode = \"full\"\nlabel_scheme = \"with-agreement\"\n\n"
        << "[eval]\nthreshold = \"3of3\"\nn_random_trials = 5\npermutations = 2000\n";
    if (!out) throw IoError("cannot write " + config.string());
    return config;
}

}  // namespace overgen::pipeline

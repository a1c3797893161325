#include "odice/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "odice/common.hpp"

namespace odice::grid {

GridSpec default_spec(double top_reward, double right_reward) {
    GridSpec spec;
    for (int x = 10; x <= 19; ++x) spec.goal_cells.push_back({{x, 29}, top_reward});
    for (int y = 10; y <= 19; ++y) spec.goal_cells.push_back({{29, y}, right_reward});
    return spec;
}

void validate(const GridSpec& spec) {
    if (spec.width < 2 || spec.height < 2)
        throw std::invalid_argument("grid: width and height must be >= 2");
    if (!in_grid(spec, spec.start))
        throw std::invalid_argument("grid: start cell outside grid");
    for (const auto& g : spec.goal_cells) {
        if (!in_grid(spec, g.cell)) throw std::invalid_argument("grid: goal cell outside grid");
        if (!(g.reward > 0.0)) throw std::invalid_argument("grid: goal rewards must be > 0");
    }
    if (!(spec.slip_prob >= 0.0 && spec.slip_prob <= 1.0))
        throw std::invalid_argument("grid: slip_prob must lie in [0, 1]");
    if (spec.max_episode_len < 1)
        throw std::invalid_argument("grid: max_episode_len must be >= 1");
}

bool in_grid(const GridSpec& spec, Cell c) {
    return c.x >= 0 && c.x < spec.width && c.y >= 0 && c.y < spec.height;
}

bool is_goal(const GridSpec& spec, Cell c) {
    for (const auto& g : spec.goal_cells)
        if (g.cell == c) return true;
    return false;
}

double goal_reward(const GridSpec& spec, Cell c) {
    for (const auto& g : spec.goal_cells)
        if (g.cell == c) return g.reward;
    return 0.0;
}

Cell move(const GridSpec& spec, Cell s, Action a) {
    Cell n = s;
    switch (a) {
        case Action::up: n.y += 1; break;
        case Action::right: n.x += 1; break;
        case Action::down: n.y -= 1; break;
        case Action::left: n.x -= 1; break;
    }
    n.x = std::clamp(n.x, 0, spec.width - 1);
    n.y = std::clamp(n.y, 0, spec.height - 1);
    return n;
}

StepResult step(const GridSpec& spec, Cell s, Action a) {
    if (!in_grid(spec, s)) throw std::invalid_argument("grid: step from cell outside grid");
    if (is_goal(spec, s)) throw std::invalid_argument("grid: step from a goal cell");
    const Cell n = move(spec, s, a);
    if (is_goal(spec, n)) return {n, goal_reward(spec, n), true};
    return {n, spec.step_reward, false};
}

namespace {

int manhattan(Cell a, Cell b) {
    return std::abs(a.x - b.x) + std::abs(a.y - b.y);
}

int dist_to_goals(const GridSpec& spec, Cell s) {
    int best = std::numeric_limits<int>::max();
    for (const auto& g : spec.goal_cells) best = std::min(best, manhattan(s, g.cell));
    return best;
}

}  // namespace

Action behavior_action(const GridSpec& spec, Cell s, std::mt19937_64& gen) {
    if (!in_grid(spec, s)) throw std::invalid_argument("grid: behavior_action outside grid");
    if (uniform01(gen) < spec.slip_prob)
        return kActionOrder[static_cast<std::size_t>(gen() % 4)];
    Action best = Action::up;
    int best_d = std::numeric_limits<int>::max();
    for (Action a : kActionOrder) {
        const int d = dist_to_goals(spec, move(spec, s, a));
        if (d < best_d) {
            best_d = d;
            best = a;
        }
    }
    return best;
}

Dataset generate_dataset(const GridSpec& spec, int n_traj, std::uint64_t seed) {
    validate(spec);
    if (n_traj < 1) throw std::invalid_argument("grid: n_traj must be >= 1");
    if (spec.goal_cells.empty()) throw std::invalid_argument("grid: dataset needs at least one goal");
    Dataset ds;
    ds.spec = spec;
    ds.seed = seed;
    auto gen = substream(seed, 0x64617461ULL);  // "data"
    for (int t = 0; t < n_traj; ++t) {
        ds.traj_offsets.push_back(ds.transitions.size());
        Cell s = spec.start;
        for (int k = 0; k < spec.max_episode_len; ++k) {
            const Action a = behavior_action(spec, s, gen);
            const StepResult res = step(spec, s, a);
            ds.transitions.push_back({s, a, res.r, res.s_next, res.done});
            if (res.done) break;
            s = res.s_next;
        }
    }
    ds.traj_offsets.push_back(ds.transitions.size());
    return ds;
}

std::vector<std::uint8_t> support_mask(const Dataset& dataset) {
    const auto& spec = dataset.spec;
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(spec.width) * spec.height, 0);
    auto mark = [&](Cell c) {
        mask[static_cast<std::size_t>(c.y) * spec.width + c.x] = 1;
    };
    for (const auto& tr : dataset.transitions) {
        mark(tr.s);
        mark(tr.s_next);
    }
    return mask;
}

std::array<double, 2> encode(const GridSpec& spec, Cell s) {
    if (!in_grid(spec, s)) throw std::invalid_argument("grid: encode outside grid");
    return {static_cast<double>(s.x) / (spec.width - 1),
            static_cast<double>(s.y) / (spec.height - 1)};
}

namespace {

std::string cell_json(Cell c) {
    return "[" + fmt_int(c.x) + "," + fmt_int(c.y) + "]";
}

std::string spec_json(const GridSpec& spec) {
    std::string out = "{\"width\":" + fmt_int(spec.width) + ",\"height\":" + fmt_int(spec.height) +
                      ",\"start\":" + cell_json(spec.start) + ",\"goal_cells\":[";
    for (std::size_t i = 0; i < spec.goal_cells.size(); ++i) {
        if (i) out += ",";
        out += "{\"cell\":" + cell_json(spec.goal_cells[i].cell) +
               ",\"reward\":" + fmt_double(spec.goal_cells[i].reward) + "}";
    }
    out += "],\"step_reward\":" + fmt_double(spec.step_reward) +
           ",\"slip_prob\":" + fmt_double(spec.slip_prob) +
           ",\"max_episode_len\":" + fmt_int(spec.max_episode_len) + "}";
    return out;
}

Cell cell_from(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 2) throw std::runtime_error("dataset: cell must be [x,y]");
    return {j[0].get<int>(), j[1].get<int>()};
}

}  // namespace

std::string to_jsonl(const Dataset& dataset) {
    std::string out = "{\"spec\":" + spec_json(dataset.spec) +
                      ",\"seed\":" + fmt_int(static_cast<long long>(dataset.seed)) + "}\n";
    for (const auto& tr : dataset.transitions) {
        out += "{\"s\":" + cell_json(tr.s) + ",\"a\":" + fmt_int(static_cast<int>(tr.a)) +
               ",\"r\":" + fmt_double(tr.r) + ",\"s_next\":" + cell_json(tr.s_next) +
               ",\"done\":" + (tr.done ? "true" : "false") + "}\n";
    }
    return out;
}

namespace {

// Rebuild trajectory boundaries: a new trajectory begins at index 0, after a
// done transition, or wherever the chain s_next -> s breaks (truncation).
std::vector<std::size_t> infer_offsets(const std::vector<Transition>& transitions) {
    std::vector<std::size_t> offsets;
    bool chain_open = false;
    Cell expect{};
    for (std::size_t i = 0; i < transitions.size(); ++i) {
        const auto& tr = transitions[i];
        if (!chain_open || !(tr.s == expect)) offsets.push_back(i);
        chain_open = !tr.done;
        expect = tr.s_next;
    }
    offsets.push_back(transitions.size());
    return offsets;
}

}  // namespace

Dataset from_jsonl(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("dataset: empty file");
    nlohmann::json header = nlohmann::json::parse(line, nullptr, true);
    if (!header.contains("spec") || !header.contains("seed"))
        throw std::runtime_error("dataset: header must carry spec and seed");
    const auto& js = header["spec"];
    Dataset ds;
    ds.spec.width = js.at("width").get<int>();
    ds.spec.height = js.at("height").get<int>();
    ds.spec.start = cell_from(js.at("start"));
    ds.spec.goal_cells.clear();
    for (const auto& g : js.at("goal_cells"))
        ds.spec.goal_cells.push_back({cell_from(g.at("cell")), g.at("reward").get<double>()});
    ds.spec.step_reward = js.at("step_reward").get<double>();
    ds.spec.slip_prob = js.at("slip_prob").get<double>();
    ds.spec.max_episode_len = js.at("max_episode_len").get<int>();
    ds.seed = header.at("seed").get<std::uint64_t>();
    validate(ds.spec);

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw std::runtime_error("dataset: line " + fmt_int(static_cast<long long>(line_no)) +
                                     ": " + e.what());
        }
        Transition tr;
        tr.s = cell_from(j.at("s"));
        const int a = j.at("a").get<int>();
        if (a < 0 || a > 3)
            throw std::runtime_error("dataset: line " + fmt_int(static_cast<long long>(line_no)) +
                                     ": action out of range");
        tr.a = static_cast<Action>(a);
        tr.r = j.at("r").get<double>();
        tr.s_next = cell_from(j.at("s_next"));
        tr.done = j.at("done").get<bool>();
        ds.transitions.push_back(tr);
    }
    ds.traj_offsets = infer_offsets(ds.transitions);
    return ds;
}

void save_jsonl(const std::string& path, const Dataset& dataset) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("dataset: cannot open for writing: " + path);
    const std::string text = to_jsonl(dataset);
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw std::runtime_error("dataset: write failed: " + path);
}

Dataset load_jsonl(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("dataset: cannot open: " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return from_jsonl(text);
}

}  // namespace odice::grid

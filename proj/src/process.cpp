#include "dtwin/process.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "dtwin/error.hpp"

namespace dtwin {

namespace {

struct Token {
    std::string text;
    bool quoted = false;
    int col = 1;
};

std::vector<Token> tokenize(std::string_view line, int line_no) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
        const char c = line[i];
        if (c == ' ') {
            ++i;
            continue;
        }
        if (c == '\t') throw ParseError("tab characters are not allowed", line_no, static_cast<int>(i) + 1);
        Token t;
        t.col = static_cast<int>(i) + 1;
        if (c == '"') {
            t.quoted = true;
            ++i;
            bool closed = false;
            while (i < line.size()) {
                if (line[i] == '\\' && i + 1 < line.size()) {
                    t.text += line[i + 1];
                    i += 2;
                    continue;
                }
                if (line[i] == '"') {
                    closed = true;
                    ++i;
                    break;
                }
                t.text += line[i++];
            }
            if (!closed) throw ParseError("unterminated string", line_no, t.col);
        } else if (c == '=') {
            t.text = "=";
            ++i;
        } else {
            while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '=' && line[i] != '"') {
                t.text += line[i++];
            }
        }
        out.push_back(std::move(t));
    }
    return out;
}

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}

bool bare_ok(const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-' || c == '+' || c == '/';
    });
}

std::string word(const std::string& s) { return bare_ok(s) ? s : quote(s); }

std::string number(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

bool valid_ref(const std::string& r) {
    const auto dot = r.find('.');
    return dot != std::string::npos && dot > 0 && dot + 1 < r.size();
}

class Parser {
public:
    ProcessModel run(std::string_view text) {
        std::size_t pos = 0;
        int line_no = 0;
        while (pos <= text.size()) {
            const auto nl = text.find('\n', pos);
            std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
            pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            handle(line, line_no);
        }
        finish();
        return std::move(p_);
    }

private:
    struct Open {
        int step;
        int level;
    };

    void handle(std::string_view line, int n) {
        std::size_t indent = 0;
        while (indent < line.size() && line[indent] == ' ') ++indent;
        if (indent < line.size() && line[indent] == '\t') throw ParseError("tab characters are not allowed", n, static_cast<int>(indent) + 1);
        if (indent == line.size() || line[indent] == '#') return;
        if (indent % 2 != 0) throw ParseError("indentation must be a multiple of two spaces", n, static_cast<int>(indent) + 1);
        const int level = static_cast<int>(indent / 2);
        auto toks = tokenize(line, n);
        const Token& kw = toks.front();
        if (kw.quoted) throw ParseError("expected a keyword", n, kw.col);
        while (!open_.empty() && open_.back().level >= level) open_.pop_back();

        if (kw.text == "PROCEDURE" || kw.text == "INSTRUCTION") {
            start_step(toks, level, n);
            return;
        }
        static const char* fields[] = {"ACTION", "TARGET", "TARGET2", "COMPLETE", "NEXT"};
        if (std::find(std::begin(fields), std::end(fields), kw.text) == std::end(fields)) {
            throw ParseError("unknown keyword '" + kw.text + "'", n, kw.col);
        }
        if (open_.empty() || open_.back().level != level - 1) {
            throw ParseError(kw.text + " must be indented under a step", n, kw.col);
        }
        Step& s = p_.steps[static_cast<std::size_t>(open_.back().step)];
        if (kw.text == "NEXT") {
            expect_count(toks, 2, n);
            if (s.explicit_next) throw ParseError("NEXT given twice", n, kw.col);
            s.next = toks[1].text;
            s.explicit_next = true;
            return;
        }
        if (s.is_procedure()) throw ParseError(kw.text + " is only valid in an instruction", n, kw.col);
        if (kw.text == "COMPLETE") {
            if (has_completion_.count(open_.back().step)) throw ParseError("COMPLETE given twice", n, kw.col);
            parse_completion(toks, s, n);
            has_completion_.insert(open_.back().step);
            return;
        }
        expect_count(toks, 2, n);
        std::string& field = kw.text == "ACTION" ? s.action : kw.text == "TARGET" ? s.target : s.target2;
        if (!field.empty()) throw ParseError(kw.text + " given twice", n, kw.col);
        if (toks[1].text.empty()) throw ParseError("empty equipment reference", n, toks[1].col);
        field = toks[1].text;
    }

    void expect_count(const std::vector<Token>& toks, std::size_t count, int n) {
        if (toks.size() < count) throw ParseError("missing argument after " + toks[0].text, n, toks[0].col + static_cast<int>(toks[0].text.size()));
        if (toks.size() > count) throw ParseError("unexpected '" + toks[count].text + "'", n, toks[count].col);
    }

    void start_step(const std::vector<Token>& toks, int level, int n) {
        const Token& kw = toks.front();
        const bool proc = kw.text == "PROCEDURE";
        int parent = -1;
        if (level > 0) {
            if (open_.empty() || open_.back().level != level - 1) throw ParseError("unexpected indentation", n, 1);
            parent = open_.back().step;
            if (!p_.steps[static_cast<std::size_t>(parent)].is_procedure()) {
                throw ParseError("an instruction cannot contain steps", n, kw.col);
            }
        }
        if (toks.size() < 2 || toks[1].quoted) throw ParseError("expected a step id", n, toks.size() > 1 ? toks[1].col : kw.col + static_cast<int>(kw.text.size()));
        if (toks.size() < 3 || !toks[2].quoted) throw ParseError("expected a quoted description", n, toks.size() > 2 ? toks[2].col : toks[1].col + static_cast<int>(toks[1].text.size()));
        Step s;
        s.kind = proc ? Step::Kind::procedure : Step::Kind::instruction;
        s.id = toks[1].text;
        s.description = toks[2].text;
        s.line = n;
        s.parent = parent;
        if (ids_.count(s.id)) {
            throw ParseError("duplicate step id '" + s.id + "' (first at line " + std::to_string(ids_[s.id]) + ")", n, toks[1].col);
        }
        ids_[s.id] = n;
        std::size_t used = 3;
        if (proc && toks.size() > 3 && !toks[3].quoted && (toks[3].text == "ORDERED" || toks[3].text == "UNORDERED")) {
            s.ordered = toks[3].text == "ORDERED";
            used = 4;
        }
        if (toks.size() > used) throw ParseError("unexpected '" + toks[used].text + "'", n, toks[used].col);
        const int idx = static_cast<int>(p_.steps.size());
        p_.steps.push_back(std::move(s));
        if (parent < 0) {
            p_.roots.push_back(idx);
        } else {
            p_.steps[static_cast<std::size_t>(parent)].children.push_back(idx);
        }
        open_.push_back({idx, level});
    }

    void parse_completion(const std::vector<Token>& toks, Step& s, int n) {
        if (toks.size() < 2) throw ParseError("COMPLETE needs WHEN or AFTER", n, toks[0].col);
        if (toks[1].text == "AFTER" && !toks[1].quoted) {
            if (toks.size() != 4 || toks[3].text != "SECONDS") throw ParseError("expected COMPLETE AFTER <n> SECONDS", n, toks[1].col);
            double v = 0.0;
            const auto& t = toks[2].text;
            const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
            if (r.ec != std::errc() || r.ptr != t.data() + t.size() || !std::isfinite(v) || v <= 0.0) {
                throw ParseError("wait must be a positive number of seconds", n, toks[2].col);
            }
            s.completion = {Condition::Kind::wait, {}, v};
            return;
        }
        if (toks[1].text != "WHEN" || toks[1].quoted) throw ParseError("COMPLETE needs WHEN or AFTER", n, toks[1].col);
        Condition c;
        std::size_t i = 2;
        for (;;) {
            if (i + 2 >= toks.size()) {
                throw ParseError("expected <instance>.<interaction> = <state>", n, i < toks.size() ? toks[i].col : toks.back().col);
            }
            const Token& ref = toks[i];
            if (ref.quoted || !valid_ref(ref.text)) throw ParseError("expected <instance>.<interaction>", n, ref.col);
            if (toks[i + 1].text != "=" || toks[i + 1].quoted) throw ParseError("expected '='", n, toks[i + 1].col);
            if (toks[i + 2].text == "=" && !toks[i + 2].quoted) throw ParseError("expected a state", n, toks[i + 2].col);
            c.all.push_back({ref.text, toks[i + 2].text});
            i += 3;
            if (i == toks.size()) break;
            if (toks[i].text != "AND" || toks[i].quoted) throw ParseError("expected AND", n, toks[i].col);
            ++i;
            if (i == toks.size()) throw ParseError("condition expected after AND", n, toks[i - 1].col + 3);
        }
        s.completion = std::move(c);
    }

    void finish() {
        for (std::size_t k = 0; k < p_.steps.size(); ++k) {
            const Step& s = p_.steps[k];
            if (s.is_procedure() && s.children.empty()) {
                throw ParseError("procedure '" + s.id + "' has no steps", s.line, 1);
            }
            if (!s.is_procedure() && !has_completion_.count(static_cast<int>(k))) {
                throw ParseError("missing completion for instruction '" + s.id + "'", s.line, 1);
            }
        }
        auto link = [&](const std::vector<int>& seq) {
            for (std::size_t k = 0; k + 1 < seq.size(); ++k) {
                Step& s = p_.steps[static_cast<std::size_t>(seq[k])];
                if (!s.explicit_next) s.next = p_.steps[static_cast<std::size_t>(seq[k + 1])].id;
            }
        };
        link(p_.roots);
        for (const auto& s : p_.steps) {
            if (s.is_procedure() && s.ordered) link(s.children);
        }
    }

    ProcessModel p_;
    std::vector<Open> open_;
    std::map<std::string, int> ids_;
    std::set<int> has_completion_;
};

bool resolves_equipment(const Scenario& sc, const std::string& path) {
    const auto slash = path.find('/');
    const auto* inst = sc.find_instance(path.substr(0, slash));
    if (!inst) return false;
    if (slash == std::string::npos) return true;
    const auto m = sc.model_of(*inst);
    return m && find_part(*m, path.substr(slash + 1)) != nullptr;
}

void print_step(const ProcessModel& p, int idx, int level, std::ostringstream& os) {
    const Step& s = p.steps[static_cast<std::size_t>(idx)];
    const std::string pad(static_cast<std::size_t>(level) * 2, ' ');
    const std::string inner(static_cast<std::size_t>(level + 1) * 2, ' ');
    if (s.is_procedure()) {
        os << pad << "PROCEDURE " << s.id << " " << quote(s.description) << (s.ordered ? " ORDERED" : " UNORDERED") << "\n";
        if (s.explicit_next) os << inner << "NEXT " << *s.next << "\n";
        for (int c : s.children) print_step(p, c, level + 1, os);
        return;
    }
    os << pad << "INSTRUCTION " << s.id << " " << quote(s.description) << "\n";
    if (!s.action.empty()) os << inner << "ACTION " << s.action << "\n";
    if (!s.target.empty()) os << inner << "TARGET " << s.target << "\n";
    if (!s.target2.empty()) os << inner << "TARGET2 " << s.target2 << "\n";
    if (s.completion.kind == Condition::Kind::wait) {
        os << inner << "COMPLETE AFTER " << number(s.completion.seconds) << " SECONDS\n";
    } else {
        os << inner << "COMPLETE WHEN ";
        for (std::size_t k = 0; k < s.completion.all.size(); ++k) {
            if (k) os << " AND ";
            os << s.completion.all[k].ref << " = " << word(s.completion.all[k].state);
        }
        os << "\n";
    }
    if (s.explicit_next) os << inner << "NEXT " << *s.next << "\n";
}

json step_to_json(const ProcessModel& p, int idx) {
    const Step& s = p.steps[static_cast<std::size_t>(idx)];
    json j = {{"id", s.id}, {"kind", s.is_procedure() ? "procedure" : "instruction"}, {"description", s.description}};
    j["next"] = s.next ? json(*s.next) : json(nullptr);
    if (s.is_procedure()) {
        j["ordered"] = s.ordered;
        json kids = json::array();
        for (int c : s.children) kids.push_back(step_to_json(p, c));
        j["children"] = kids;
        return j;
    }
    j["action_object"] = s.action.empty() ? json(nullptr) : json(s.action);
    j["target_object"] = s.target.empty() ? json(nullptr) : json(s.target);
    j["target_object2"] = s.target2.empty() ? json(nullptr) : json(s.target2);
    j["monitored"] = s.monitored();
    if (s.completion.kind == Condition::Kind::wait) {
        j["completion"] = {{"kind", "wait"}, {"seconds", s.completion.seconds}};
    } else {
        json all = json::array();
        for (const auto& r : s.completion.all) all.push_back({{"ref", r.ref}, {"state", r.state}});
        j["completion"] = {{"kind", "states"}, {"all", all}};
    }
    return j;
}

void frontier(const ProcessModel& p, int idx, const std::set<std::string>& done, std::vector<int>& out);

void frontier_seq(const ProcessModel& p, const std::vector<int>& seq, bool ordered, const std::set<std::string>& done,
                  std::vector<int>& out) {
    if (seq.empty()) return;
    if (!ordered) {
        for (int c : seq) {
            if (!step_complete(p, c, done)) frontier(p, c, done, out);
        }
        return;
    }
    std::set<int> seen;
    int cur = seq.front();
    while (cur >= 0 && seen.insert(cur).second) {
        if (!step_complete(p, cur, done)) {
            frontier(p, cur, done, out);
            return;
        }
        const auto& nx = p.steps[static_cast<std::size_t>(cur)].next;
        cur = nx ? p.index_of(*nx) : -1;
    }
}

void frontier(const ProcessModel& p, int idx, const std::set<std::string>& done, std::vector<int>& out) {
    const Step& s = p.steps[static_cast<std::size_t>(idx)];
    if (!s.is_procedure()) {
        out.push_back(idx);
        return;
    }
    frontier_seq(p, s.children, s.ordered, done, out);
}

}  // namespace

std::vector<std::string> Step::monitored() const {
    std::vector<std::string> out;
    for (const auto& r : completion.all) {
        if (std::find(out.begin(), out.end(), r.ref) == out.end()) out.push_back(r.ref);
    }
    return out;
}

int ProcessModel::index_of(const std::string& id) const {
    for (std::size_t k = 0; k < steps.size(); ++k) {
        if (steps[k].id == id) return static_cast<int>(k);
    }
    return -1;
}

const Step* ProcessModel::find(const std::string& id) const {
    const int k = index_of(id);
    return k < 0 ? nullptr : &steps[static_cast<std::size_t>(k)];
}

std::optional<std::string> ProcessModel::entry() const {
    if (roots.empty()) return std::nullopt;
    return steps[static_cast<std::size_t>(roots.front())].id;
}

ProcessModel parse_process(std::string_view text) { return Parser().run(text); }

ProcessModel load_process(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_process(ss.str());
}

std::string print_process(const ProcessModel& p) {
    std::ostringstream os;
    for (int r : p.roots) print_step(p, r, 0, os);
    return os.str();
}

json process_to_json(const ProcessModel& p) {
    json steps = json::array();
    for (int r : p.roots) steps.push_back(step_to_json(p, r));
    const auto e = p.entry();
    return {{"entry", e ? json(*e) : json(nullptr)}, {"steps", steps}};
}

std::vector<Issue> check_scenario(const ProcessModel& process, const Scenario& scenario) {
    std::vector<Issue> out;
    for (const auto& s : process.steps) {
        const std::string where = "steps/" + s.id;
        if (s.next && !process.find(*s.next)) {
            out.push_back({where + "/next", "dangling_next", "next step '" + *s.next + "' does not exist"});
        }
        if (s.is_procedure()) continue;
        const std::pair<const char*, const std::string*> objs[] = {
            {"action", &s.action}, {"target", &s.target}, {"target2", &s.target2}};
        for (const auto& [name, val] : objs) {
            if (!val->empty() && !resolves_equipment(scenario, *val)) {
                out.push_back({where + "/" + name, "unresolved_reference", "equipment '" + *val + "' is not in the scenario"});
            }
        }
        for (std::size_t k = 0; k < s.completion.all.size(); ++k) {
            const auto& req = s.completion.all[k];
            const std::string at = where + "/completion/" + std::to_string(k);
            const auto [inst_id, inter_id] = split_ref(req.ref);
            const auto* inst = scenario.find_instance(inst_id);
            if (!inst) {
                out.push_back({at, "unresolved_reference", "equipment '" + inst_id + "' is not in the scenario"});
                continue;
            }
            const auto* inter = inst->find_interaction(inter_id);
            if (!inter) {
                out.push_back({at, "unknown_interaction", "'" + inst_id + "' has no interaction '" + inter_id + "'"});
                continue;
            }
            bool legal = false;
            std::string allowed;
            if (inter->type == InteractionType::button || inter->type == InteractionType::dial) {
                const auto st = inter->states();
                legal = std::find(st.begin(), st.end(), req.state) != st.end();
                for (const auto& x : st) allowed += (allowed.empty() ? "" : ", ") + x;
            } else if (inter->type == InteractionType::snap_connector) {
                allowed = "disconnected, connected or a compatible connector";
                if (req.state == "disconnected" || req.state == "connected") {
                    legal = true;
                } else if (const auto* peer = scenario.find_interaction(req.state)) {
                    legal = peer != inter && snap_compatible(*inter, *peer);
                }
            } else {
                allowed = "none (" + std::string(interaction_type_name(inter->type)) + " has no named states)";
            }
            if (!legal) {
                out.push_back({at, "invalid_state", "state '" + req.state + "' is not valid for " + req.ref + "; allowed: " + allowed});
            }
        }
    }
    // next chains
    for (std::size_t k = 0; k < process.steps.size(); ++k) {
        std::set<int> seen{static_cast<int>(k)};
        int cur = static_cast<int>(k);
        int lowest = cur;
        bool cycle = false;
        for (;;) {
            const auto& nx = process.steps[static_cast<std::size_t>(cur)].next;
            if (!nx) break;
            cur = process.index_of(*nx);
            if (cur < 0) break;
            if (cur == static_cast<int>(k)) {
                cycle = true;
                break;
            }
            if (!seen.insert(cur).second) break;  // enters a cycle not containing k
            lowest = std::min(lowest, cur);
        }
        if (cycle && lowest == static_cast<int>(k)) {
            out.push_back({"steps/" + process.steps[k].id + "/next", "next_cycle",
                           "next links starting at '" + process.steps[k].id + "' form a cycle"});
        }
    }
    return out;
}

bool step_complete(const ProcessModel& p, int index, const std::set<std::string>& completed) {
    const Step& s = p.steps[static_cast<std::size_t>(index)];
    if (completed.count(s.id)) return true;
    if (!s.is_procedure()) return false;
    return std::all_of(s.children.begin(), s.children.end(), [&](int c) { return step_complete(p, c, completed); });
}

std::vector<std::string> eligible_steps(const ProcessModel& p, const std::set<std::string>& completed) {
    std::vector<int> idx;
    frontier_seq(p, p.roots, true, completed, idx);
    std::sort(idx.begin(), idx.end());
    std::vector<std::string> out;
    for (int i : idx) out.push_back(p.steps[static_cast<std::size_t>(i)].id);
    return out;
}

std::optional<std::string> next_step(const ProcessModel& p, const std::string& current, std::set<std::string> completed) {
    if (p.index_of(current) < 0) throw ValidationError("unknown step id '" + current + "'");
    completed.insert(current);
    const auto e = eligible_steps(p, completed);
    if (e.empty()) return std::nullopt;
    return e.front();
}

}  // namespace dtwin

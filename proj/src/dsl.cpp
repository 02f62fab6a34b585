#include "flowforge/dsl.hpp"

#include <algorithm>
#include <functional>
#include <queue>
#include <set>

#include "flowforge/error.hpp"

namespace flowforge {

using nlohmann::json;

std::string_view mode_name(WorkflowMode mode) {
  return mode == WorkflowMode::kStream ? "stream" : "batch";
}

std::optional<WorkflowMode> parse_mode(std::string_view name) {
  if (name == "stream") return WorkflowMode::kStream;
  if (name == "batch" || name == "task") return WorkflowMode::kBatch;
  return std::nullopt;
}

const NodeSpec* WorkflowDefinition::find_node(std::string_view id) const {
  for (const auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

json definition_to_json(const WorkflowDefinition& def) {
  json nodes = json::array();
  for (const auto& n : def.nodes) {
    json jn = {{"id", n.id}, {"service", n.service}, {"bindings", n.bindings}};
    if (n.version) jn["version"] = *n.version;
    nodes.push_back(std::move(jn));
  }
  json edges = json::array();
  for (const auto& e : def.edges) edges.push_back(json::array({e.from, e.to}));
  return {{"name", def.name}, {"mode", mode_name(def.mode)}, {"nodes", nodes}, {"edges", edges}};
}

WorkflowDefinition definition_from_json(const json& j) {
  try {
    WorkflowDefinition def;
    def.name = j.value("name", "");
    auto mode = parse_mode(j.at("mode").get<std::string>());
    if (!mode) throw Error(Errc::kInvalidWorkflow, "mode must be stream or batch");
    def.mode = *mode;
    for (const auto& jn : j.at("nodes")) {
      NodeSpec n;
      n.id = jn.at("id").get<std::string>();
      n.service = jn.at("service").get<std::string>();
      if (jn.contains("version") && !jn["version"].is_null()) {
        n.version = jn["version"].get<std::string>();
      }
      if (jn.contains("bindings")) {
        n.bindings = jn["bindings"].get<std::map<std::string, std::string>>();
      }
      def.nodes.push_back(std::move(n));
    }
    for (const auto& je : j.at("edges")) {
      def.edges.push_back({je.at(0).get<std::string>(), je.at(1).get<std::string>()});
    }
    return def;
  } catch (const json::exception& e) {
    throw Error(Errc::kInvalidWorkflow, std::string("malformed workflow definition: ") + e.what());
  }
}

json validated_to_json(const ValidatedWorkflow& vw) {
  json resolved = json::object();
  for (const auto& [id, d] : vw.resolved) resolved[id] = descriptor_to_json(d);
  json bindings = json::object();
  for (const auto& [id, params] : vw.bindings) {
    json jp = json::object();
    for (const auto& [k, v] : params) jp[k] = value_to_json(v);
    bindings[id] = std::move(jp);
  }
  return {{"definition", definition_to_json(vw.definition)},
          {"resolved", resolved},
          {"bindings", bindings}};
}

namespace dsl {
namespace {

constexpr int kMaxNesting = 64;

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}

bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9') || c == '-'; }

bool is_key_char(char c) { return is_ident_char(c) || c == '.'; }

bool is_version_char(char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '.' ||
         c == '-' || c == '+';
}

bool is_bare_value_char(char c) {
  return !is_space(c) && c != '|' && c != '&' && c != '<' && c != '>' && c != '"';
}

// Entry and exit node positions of a parsed sub-expression.
struct Fragment {
  std::vector<std::size_t> entries;
  std::vector<std::size_t> exits;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  WorkflowDefinition parse_stream() {
    def_.mode = WorkflowMode::kStream;
    std::size_t prev = parse_node();
    std::size_t count = 1;
    while (true) {
      skip_space();
      if (at_end()) break;
      if (peek() != '|' || peek(1) == '|') fail("expected '|' between stream nodes");
      advance();
      std::size_t next = parse_node();
      add_edge(prev, next);
      prev = next;
      ++count;
    }
    if (count < 2) fail("a stream needs at least two nodes joined by '|'");
    return finish();
  }

  WorkflowDefinition parse_task() {
    def_.mode = WorkflowMode::kBatch;
    parse_task_expr(0);
    skip_space();
    if (!at_end()) fail("unexpected input after task definition");
    return finish();
  }

 private:
  Fragment parse_task_expr(int depth) {
    Fragment whole = parse_term(depth);
    while (true) {
      skip_space();
      if (!(peek() == '&' && peek(1) == '&')) break;
      advance();
      advance();
      Fragment next = parse_term(depth);
      for (auto from : whole.exits) {
        for (auto to : next.entries) add_edge(from, to);
      }
      whole.exits = next.exits;
    }
    return whole;
  }

  Fragment parse_term(int depth) {
    skip_space();
    if (peek() == '<') {
      if (depth >= kMaxNesting) fail("splits nested too deeply");
      advance();
      Fragment split;
      std::size_t branches = 0;
      while (true) {
        Fragment branch = parse_task_expr(depth + 1);
        ++branches;
        split.entries.insert(split.entries.end(), branch.entries.begin(), branch.entries.end());
        split.exits.insert(split.exits.end(), branch.exits.begin(), branch.exits.end());
        skip_space();
        if (peek() == '|' && peek(1) == '|') {
          advance();
          advance();
          continue;
        }
        if (peek() == '>') {
          advance();
          break;
        }
        fail(at_end() ? "unclosed split, expected '||' or '>'" : "expected '||' or '>' in split");
      }
      if (branches < 2) fail("a split needs at least two branches joined by '||'");
      return split;
    }
    std::size_t node = parse_node();
    return Fragment{{node}, {node}};
  }

  std::size_t parse_node() {
    skip_space();
    auto start_line = line_;
    auto start_col = col_;
    if (at_end()) fail("expected a service name");
    std::string word = parse_identifier("service name");
    NodeSpec node;
    bool labeled = false;
    if (peek() == ':') {
      advance();
      skip_space();
      node.id = word;
      labeled = true;
      if (at_end()) fail("expected a service name after label");
      node.service = parse_identifier("service name");
    } else {
      node.service = word;
    }
    if (peek() == '@') {
      advance();
      std::string version;
      while (!at_end() && is_version_char(peek())) version.push_back(advance());
      if (version.empty()) fail("expected a version after '@'");
      node.version = std::move(version);
    }
    if (!at_end() && !is_space(peek()) && peek() != '|' && peek() != '&' && peek() != '>') {
      fail(std::string("unexpected character '") + peek() + "' in node");
    }
    while (true) {
      auto save_pos = pos_;
      auto save_line = line_;
      auto save_col = col_;
      skip_space();
      if (!(peek() == '-' && peek(1) == '-')) {
        pos_ = save_pos;
        line_ = save_line;
        col_ = save_col;
        break;
      }
      advance();
      advance();
      auto key_line = line_;
      auto key_col = col_;
      std::string key;
      if (at_end() || !is_ident_start(peek())) fail("expected an option name after '--'");
      while (!at_end() && is_key_char(peek())) key.push_back(advance());
      if (peek() != '=') fail("expected '=' after option name");
      advance();
      std::string value = parse_value();
      if (!node.bindings.emplace(key, std::move(value)).second) {
        fail_at(key_line, key_col, "duplicate option '--" + key + "'");
      }
    }
    std::size_t index = def_.nodes.size();
    if (!labeled) node.id = "n" + std::to_string(index);
    positions_.push_back({start_line, start_col});
    def_.nodes.push_back(std::move(node));
    return index;
  }

  std::string parse_identifier(const char* what) {
    if (at_end() || !is_ident_start(peek())) fail(std::string("expected a ") + what);
    std::string out;
    while (!at_end() && is_ident_char(peek())) out.push_back(advance());
    return out;
  }

  std::string parse_value() {
    std::string out;
    if (peek() == '"') {
      advance();
      while (true) {
        if (at_end()) fail("unterminated quoted value");
        char c = advance();
        if (c == '"') break;
        if (c == '\\') {
          if (at_end()) fail("unterminated quoted value");
          char e = advance();
          if (e != '"' && e != '\\') fail("invalid escape in quoted value");
          out.push_back(e);
        } else {
          out.push_back(c);
        }
      }
      if (!at_end() && !is_space(peek()) && peek() != '|' && peek() != '&' && peek() != '>') {
        fail("unexpected character after quoted value");
      }
      return out;
    }
    while (!at_end() && is_bare_value_char(peek())) out.push_back(advance());
    return out;
  }

  void add_edge(std::size_t from, std::size_t to) { edge_positions_.insert({from, to}); }

  WorkflowDefinition finish() {
    std::set<std::string> ids;
    for (std::size_t i = 0; i < def_.nodes.size(); ++i) {
      if (!ids.insert(def_.nodes[i].id).second) {
        fail_at(positions_[i].first, positions_[i].second,
                "duplicate node id '" + def_.nodes[i].id + "'");
      }
    }
    for (const auto& [from, to] : edge_positions_) {
      def_.edges.push_back({def_.nodes[from].id, def_.nodes[to].id});
    }
    return std::move(def_);
  }

  bool at_end() const { return pos_ >= text_.size(); }
  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0';
  }
  char advance() {
    char c = text_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }
  void skip_space() {
    while (!at_end() && is_space(peek())) advance();
  }

  [[noreturn]] void fail(const std::string& message) const { fail_at(line_, col_, message); }

  [[noreturn]] static void fail_at(std::size_t line, std::size_t col, const std::string& message) {
    throw Error(Errc::kSyntaxError,
                "line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + message,
                {{"line", line}, {"column", col}});
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
  WorkflowDefinition def_;
  std::vector<std::pair<std::size_t, std::size_t>> positions_;
  std::set<std::pair<std::size_t, std::size_t>> edge_positions_;
};

// --- serialization ---------------------------------------------------------

struct Expr {
  enum class Kind { kNode, kSeq, kPar } kind = Kind::kNode;
  std::size_t node = 0;
  std::vector<Expr> children;
};

class Decomposer {
 public:
  explicit Decomposer(const WorkflowDefinition& def) : n_(def.nodes.size()), out_(n_), in_(n_) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < n_; ++i) index[def.nodes[i].id] = i;
    for (const auto& e : def.edges) {
      out_[index.at(e.from)].insert(index.at(e.to));
      in_[index.at(e.to)].insert(index.at(e.from));
    }
  }

  Expr decompose_all() {
    std::set<std::size_t> all;
    for (std::size_t i = 0; i < n_; ++i) all.insert(i);
    return decompose(all);
  }

 private:
  using Set = std::set<std::size_t>;

  Set restrict(const Set& s, const Set& within) const {
    Set out;
    for (auto v : s) {
      if (within.count(v)) out.insert(v);
    }
    return out;
  }

  // Weakly connected components of `subset`, skipping edges in `cut`.
  std::vector<Set> components(const Set& subset,
                              const std::set<std::pair<std::size_t, std::size_t>>& cut) const {
    std::vector<Set> comps;
    Set seen;
    for (auto start : subset) {
      if (seen.count(start)) continue;
      Set comp;
      std::vector<std::size_t> stack{start};
      seen.insert(start);
      while (!stack.empty()) {
        auto v = stack.back();
        stack.pop_back();
        comp.insert(v);
        auto visit = [&](std::size_t w, bool forward) {
          if (!subset.count(w) || seen.count(w)) return;
          auto key = forward ? std::make_pair(v, w) : std::make_pair(w, v);
          if (cut.count(key)) return;
          seen.insert(w);
          stack.push_back(w);
        };
        for (auto w : out_[v]) visit(w, true);
        for (auto w : in_[v]) visit(w, false);
      }
      comps.push_back(std::move(comp));
    }
    return comps;
  }

  static void append_flat(Expr& seq, Expr part) {
    if (part.kind == Expr::Kind::kSeq) {
      for (auto& c : part.children) seq.children.push_back(std::move(c));
    } else {
      seq.children.push_back(std::move(part));
    }
  }

  Expr decompose(const Set& subset) {
    if (subset.size() == 1) return Expr{Expr::Kind::kNode, *subset.begin(), {}};
    auto comps = components(subset, {});
    if (comps.size() > 1) {
      Expr par{Expr::Kind::kPar, 0, {}};
      for (const auto& c : comps) par.children.push_back(decompose(c));
      return par;
    }
    for (auto y : subset) {
      Set xs = restrict(in_[y], subset);
      if (xs.empty()) continue;
      Set ys = restrict(out_[*xs.begin()], subset);
      bool bundle = true;
      for (auto x : xs) bundle = bundle && restrict(out_[x], subset) == ys;
      for (auto y2 : ys) bundle = bundle && restrict(in_[y2], subset) == xs;
      if (!bundle) continue;
      std::set<std::pair<std::size_t, std::size_t>> cut;
      for (auto x : xs) {
        for (auto y2 : ys) cut.insert({x, y2});
      }
      // A parallel head or tail falls apart into several components; each
      // must hold bundle sources only or bundle targets only.
      Set head;
      Set tail;
      bool ok = true;
      for (const auto& part : components(subset, cut)) {
        bool has_x = std::any_of(part.begin(), part.end(), [&](auto v) { return xs.count(v) > 0; });
        bool has_y = std::any_of(part.begin(), part.end(), [&](auto v) { return ys.count(v) > 0; });
        if (has_x == has_y) {
          ok = false;
          break;
        }
        (has_x ? head : tail).insert(part.begin(), part.end());
      }
      if (!ok) continue;
      // Exits of the head must be exactly the bundle sources, entries of the
      // tail exactly its targets; otherwise re-parsing would add edges.
      for (auto v : head) {
        bool exit = restrict(out_[v], head).empty();
        ok = ok && (exit == (xs.count(v) > 0));
      }
      for (auto v : tail) {
        bool entry = restrict(in_[v], tail).empty();
        ok = ok && (entry == (ys.count(v) > 0));
      }
      if (!ok) continue;
      Expr seq{Expr::Kind::kSeq, 0, {}};
      append_flat(seq, decompose(head));
      append_flat(seq, decompose(tail));
      return seq;
    }
    throw Error(Errc::kInvalidWorkflow,
                "batch graph cannot be expressed with '&&' and '< || >' composition");
  }

  std::size_t n_;
  std::vector<Set> out_;
  std::vector<Set> in_;
};

void collect_order(const Expr& e, std::vector<std::size_t>& order) {
  if (e.kind == Expr::Kind::kNode) {
    order.push_back(e.node);
    return;
  }
  for (const auto& c : e.children) collect_order(c, order);
}

std::string node_text(const NodeSpec& n, std::size_t position) {
  std::string out;
  if (n.id != "n" + std::to_string(position)) out += n.id + ": ";
  out += n.service;
  if (n.version) out += "@" + *n.version;
  for (const auto& [k, v] : n.bindings) out += " --" + k + "=" + quote_value(v);
  return out;
}

std::string emit(const Expr& e, const WorkflowDefinition& def,
                 const std::map<std::size_t, std::size_t>& position) {
  switch (e.kind) {
    case Expr::Kind::kNode:
      return node_text(def.nodes[e.node], position.at(e.node));
    case Expr::Kind::kSeq: {
      std::string out;
      for (std::size_t i = 0; i < e.children.size(); ++i) {
        if (i) out += " && ";
        out += emit(e.children[i], def, position);
      }
      return out;
    }
    case Expr::Kind::kPar: {
      std::string out = "<";
      for (std::size_t i = 0; i < e.children.size(); ++i) {
        if (i) out += " || ";
        out += emit(e.children[i], def, position);
      }
      return out + ">";
    }
  }
  return {};
}

}  // namespace

WorkflowDefinition parse_stream(std::string_view text, std::string name) {
  auto def = Parser(text).parse_stream();
  def.name = std::move(name);
  return def;
}

WorkflowDefinition parse_task(std::string_view text, std::string name) {
  auto def = Parser(text).parse_task();
  def.name = std::move(name);
  return def;
}

WorkflowDefinition parse(std::string_view text, WorkflowMode mode, std::string name) {
  return mode == WorkflowMode::kStream ? parse_stream(text, std::move(name))
                                       : parse_task(text, std::move(name));
}

void check_definition(const WorkflowDefinition& def) {
  if (def.nodes.empty()) throw Error(Errc::kInvalidWorkflow, "workflow has no nodes");
  auto word = [](const std::string& s, auto pred) {
    return !s.empty() && is_ident_start(s.front()) && std::all_of(s.begin(), s.end(), pred);
  };
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < def.nodes.size(); ++i) {
    const auto& n = def.nodes[i];
    bool ok = word(n.id, is_ident_char) && word(n.service, is_ident_char);
    if (n.version) {
      ok = ok && !n.version->empty() &&
           std::all_of(n.version->begin(), n.version->end(), is_version_char);
    }
    for (const auto& [key, value] : n.bindings) ok = ok && word(key, is_key_char);
    if (!ok) throw Error(Errc::kInvalidWorkflow, "node " + n.id + " has malformed names");
    if (!index.emplace(def.nodes[i].id, i).second) {
      throw Error(Errc::kInvalidWorkflow, "duplicate node id '" + def.nodes[i].id + "'");
    }
  }
  for (const auto& e : def.edges) {
    if (!index.count(e.from) || !index.count(e.to)) {
      throw Error(Errc::kInvalidWorkflow, "edge references unknown node " + e.from + "->" + e.to);
    }
  }
  if (def.mode == WorkflowMode::kStream) {
    if (def.nodes.size() < 2) throw Error(Errc::kInvalidWorkflow, "stream needs at least two nodes");
    std::set<Edge> expected;
    for (std::size_t i = 0; i + 1 < def.nodes.size(); ++i) {
      expected.insert({def.nodes[i].id, def.nodes[i + 1].id});
    }
    std::set<Edge> actual(def.edges.begin(), def.edges.end());
    if (actual != expected || actual.size() != def.edges.size()) {
      throw Error(Errc::kInvalidWorkflow, "stream nodes must form a single linear chain");
    }
    return;
  }
  // Throws on cycles.
  topological_order(def);
}

std::vector<std::string> topological_order(const WorkflowDefinition& def) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < def.nodes.size(); ++i) index[def.nodes[i].id] = i;
  std::vector<std::vector<std::size_t>> out(def.nodes.size());
  std::vector<std::size_t> indegree(def.nodes.size(), 0);
  for (const auto& e : def.edges) {
    auto f = index.find(e.from);
    auto t = index.find(e.to);
    if (f == index.end() || t == index.end()) {
      throw Error(Errc::kInvalidWorkflow, "edge references unknown node");
    }
    out[f->second].push_back(t->second);
    ++indegree[t->second];
  }
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < indegree.size(); ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  std::vector<std::string> order;
  while (!ready.empty()) {
    auto v = ready.top();
    ready.pop();
    order.push_back(def.nodes[v].id);
    for (auto w : out[v]) {
      if (--indegree[w] == 0) ready.push(w);
    }
  }
  if (order.size() != def.nodes.size()) throw Error(Errc::kInvalidWorkflow, "workflow graph has a cycle");
  return order;
}

ValidatedWorkflow validate(const WorkflowDefinition& def, const Catalogue& catalogue) {
  check_definition(def);
  ValidatedWorkflow vw;
  vw.definition = def;
  for (std::size_t i = 0; i < def.nodes.size(); ++i) {
    const auto& node = def.nodes[i];
    ServiceDescriptor d;
    try {
      d = node.version ? catalogue.get_service(node.service, *node.version)
                       : catalogue.get_service(node.service);
    } catch (const Error& e) {
      if (e.code() != Errc::kNotFound) throw;
      throw Error(Errc::kUnknownService,
                  "node " + node.id + ": unknown service '" + node.service +
                      (node.version ? "@" + *node.version : "") + "'",
                  {{"node", node.id}, {"service", node.service}});
    }
    ServiceKind expected = ServiceKind::kTask;
    if (def.mode == WorkflowMode::kStream) {
      expected = i == 0                       ? ServiceKind::kSource
                 : i + 1 == def.nodes.size() ? ServiceKind::kSink
                                             : ServiceKind::kProcessor;
    }
    if (d.kind != expected) {
      throw Error(Errc::kKindMismatch,
                  "node " + node.id + ": expected kind " + std::string(kind_name(expected)) +
                      " but service is " + std::string(kind_name(d.kind)),
                  {{"node", node.id},
                   {"expected", kind_name(expected)},
                   {"actual", kind_name(d.kind)}});
    }
    std::map<std::string, Value> coerced;
    for (const auto& [key, literal] : node.bindings) {
      const ParamSpec* spec = d.find_param(key);
      if (!spec) {
        throw Error(Errc::kBindingTypeError, "node " + node.id + ": unknown parameter '" + key + "'",
                    {{"node", node.id}, {"param", key}, {"reason", "unknown parameter"}});
      }
      auto v = coerce_param(*spec, literal);
      if (!v) {
        throw Error(Errc::kBindingTypeError,
                    "node " + node.id + ": value '" + literal + "' is not a valid " +
                        std::string(param_type_name(spec->dtype)) + " for '" + key + "'",
                    {{"node", node.id}, {"param", key}, {"reason", "type mismatch"}});
      }
      coerced.emplace(key, std::move(*v));
    }
    for (const auto& p : d.params) {
      if (coerced.count(p.name)) continue;
      if (p.default_value) {
        coerced.emplace(p.name, *p.default_value);
      } else {
        throw Error(Errc::kMissingRequiredParam,
                    "node " + node.id + ": missing required parameter '" + p.name + "'",
                    {{"node", node.id}, {"param", p.name}});
      }
    }
    vw.resolved.emplace(node.id, std::move(d));
    vw.bindings.emplace(node.id, std::move(coerced));
  }
  return vw;
}

std::string quote_value(std::string_view value) {
  bool bare = !value.empty() &&
              std::all_of(value.begin(), value.end(), [](char c) { return is_bare_value_char(c); });
  if (bare) return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string serialize(const WorkflowDefinition& def) {
  check_definition(def);
  if (def.mode == WorkflowMode::kStream) {
    std::string out;
    for (std::size_t i = 0; i < def.nodes.size(); ++i) {
      if (i) out += " | ";
      out += node_text(def.nodes[i], i);
    }
    return out;
  }
  Expr root = Decomposer(def).decompose_all();
  std::vector<std::size_t> order;
  collect_order(root, order);
  std::map<std::size_t, std::size_t> position;
  for (std::size_t i = 0; i < order.size(); ++i) position[order[i]] = i;
  return emit(root, def, position);
}

}  // namespace dsl
}  // namespace flowforge

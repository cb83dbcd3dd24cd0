#include "groundjudge/template_engine.hpp"

#include <memory>
#include <vector>

#include "groundjudge/error.hpp"

namespace groundjudge {
namespace {

constexpr int kMaxPartialDepth = 8;

struct Node {
  enum class Kind { kText, kVariable, kSection, kInverted, kPartial };
  Kind kind = Kind::kText;
  std::string value;  // text, or tag name
  std::vector<Node> children;
};

struct Tag {
  char sigil = 0;  // 0 for variables
  std::string name;
  std::size_t begin = 0;  // offset of "{{"
  std::size_t end = 0;    // offset past "}}"
};

bool IsBlank(char c) { return c == ' ' || c == '\t' || c == '\r'; }

std::string Trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (IsBlank(s[b]) || s[b] == '\n')) ++b;
  while (e > b && (IsBlank(s[e - 1]) || s[e - 1] == '\n')) --e;
  return std::string(s.substr(b, e - b));
}

[[noreturn]] void Fail(const std::string& message) { throw Error(ErrorKind::kTemplate, message); }

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  std::vector<Node> Parse() {
    std::vector<Node> root;
    std::vector<std::vector<Node>*> stack{&root};
    std::vector<Node*> open;
    std::size_t pos = 0;
    while (pos < text_.size()) {
      const std::size_t start = text_.find("{{", pos);
      if (start == std::string_view::npos) {
        Emit(*stack.back(), text_.substr(pos));
        break;
      }
      Tag tag = ReadTag(start);
      std::size_t text_end = start;
      std::size_t resume = tag.end;
      if (tag.sigil != 0) Standalone(pos, text_end, resume);
      Emit(*stack.back(), text_.substr(pos, text_end - pos));
      pos = resume;

      switch (tag.sigil) {
        case 0:
          stack.back()->push_back({Node::Kind::kVariable, tag.name, {}});
          break;
        case '!':
          break;
        case '>':
          stack.back()->push_back({Node::Kind::kPartial, tag.name, {}});
          break;
        case '#':
        case '^': {
          auto kind = tag.sigil == '#' ? Node::Kind::kSection : Node::Kind::kInverted;
          stack.back()->push_back({kind, tag.name, {}});
          open.push_back(&stack.back()->back());
          stack.push_back(&open.back()->children);
          break;
        }
        case '/':
          if (open.empty() || open.back()->value != tag.name) {
            Fail("unexpected closing tag {{/" + tag.name + "}}");
          }
          open.pop_back();
          stack.pop_back();
          break;
      }
    }
    if (!open.empty()) Fail("unclosed section {{#" + open.back()->value + "}}");
    return root;
  }

 private:
  Tag ReadTag(std::size_t start) {
    const std::size_t close = text_.find("}}", start + 2);
    if (close == std::string_view::npos) Fail("unterminated tag at offset " + std::to_string(start));
    std::string_view inner = text_.substr(start + 2, close - start - 2);
    Tag tag;
    tag.begin = start;
    tag.end = close + 2;
    if (!inner.empty() && (inner[0] == '#' || inner[0] == '^' || inner[0] == '/' ||
                           inner[0] == '>' || inner[0] == '!')) {
      tag.sigil = inner[0];
      inner.remove_prefix(1);
    }
    tag.name = Trim(inner);
    if (tag.sigil != '!' && tag.name.empty()) Fail("empty tag at offset " + std::to_string(start));
    return tag;
  }

  // A non-variable tag alone on its line swallows the line's indentation and
  // its trailing newline.
  void Standalone(std::size_t line_floor, std::size_t& text_end, std::size_t& resume) const {
    std::size_t b = text_end;
    while (b > line_floor && IsBlank(text_[b - 1])) --b;
    const bool starts_line = b == 0 || text_[b - 1] == '\n';
    if (!starts_line) return;
    std::size_t e = resume;
    while (e < text_.size() && IsBlank(text_[e])) ++e;
    if (e < text_.size() && text_[e] != '\n') return;
    text_end = b;
    resume = e < text_.size() ? e + 1 : e;
  }

  static void Emit(std::vector<Node>& nodes, std::string_view text) {
    if (text.empty()) return;
    nodes.push_back({Node::Kind::kText, std::string(text), {}});
  }

  std::string_view text_;
};

class Renderer {
 public:
  explicit Renderer(const TemplateContext& context) : context_(context) {}

  void Render(const std::vector<Node>& nodes, std::string& out, int depth) const {
    for (const Node& node : nodes) {
      switch (node.kind) {
        case Node::Kind::kText:
          out += node.value;
          break;
        case Node::Kind::kVariable: {
          auto it = context_.variables.find(node.value);
          if (it == context_.variables.end()) Fail("unknown variable {{" + node.value + "}}");
          out += it->second;
          break;
        }
        case Node::Kind::kSection:
        case Node::Kind::kInverted: {
          auto it = context_.flags.find(node.value);
          if (it == context_.flags.end()) Fail("unknown flag {{#" + node.value + "}}");
          if (it->second == (node.kind == Node::Kind::kSection)) Render(node.children, out, depth);
          break;
        }
        case Node::Kind::kPartial: {
          auto it = context_.partials.find(node.value);
          if (it == context_.partials.end()) Fail("unknown partial {{>" + node.value + "}}");
          if (depth >= kMaxPartialDepth) Fail("partial recursion too deep at " + node.value);
          Render(Parser(it->second).Parse(), out, depth + 1);
          break;
        }
      }
    }
  }

 private:
  const TemplateContext& context_;
};

}  // namespace

std::string RenderTemplate(std::string_view text, const TemplateContext& context) {
  std::string out;
  Renderer(context).Render(Parser(text).Parse(), out, 0);
  return out;
}

}  // namespace groundjudge

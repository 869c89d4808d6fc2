#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "cfnt/core.hpp"

namespace cfnt {

struct TrieCursor {
    int32_t node = 0;   // index into the node pool, 0 = root
    int32_t depth = 0;  // tokens consumed since the root

    friend bool operator==(const TrieCursor&, const TrieCursor&) = default;
};

// Token-level prefix trie over a name list. The trie is the sole authority on
// which tokens may be emitted inside the name class and on when a name is
// complete. Immutable after build; cursors are per-hypothesis values.
class NameTrie {
  public:
    NameTrie() : nodes_(1) {}

    // Accepts exactly the deduplicated name list. Throws on an empty name.
    static NameTrie build(const NameList& names);

    TrieCursor root() const { return TrieCursor{}; }

    // Child cursor when the edge exists, nullopt on a dead end.
    std::optional<TrieCursor> step(TrieCursor cursor, int32_t token) const;

    // Exactly the child keys of the cursor's node, ascending.
    std::vector<int32_t> allowed_tokens(TrieCursor cursor) const;

    // Name index when the consumed prefix is a complete name.
    std::optional<int32_t> accepting_name(TrieCursor cursor) const;

    bool empty() const { return nodes_.size() == 1 && nodes_[0].children.empty(); }
    size_t node_count() const { return nodes_.size(); }
    int32_t name_count() const { return name_count_; }
    int32_t max_depth() const { return max_depth_; }

  private:
    struct Node {
        std::map<int32_t, int32_t> children;
        int32_t name_index = -1;
    };

    const Node& node_at(TrieCursor cursor) const;

    std::vector<Node> nodes_;
    int32_t name_count_ = 0;
    int32_t max_depth_ = 0;
};

// Non-overlapping longest-match occurrences of any name, scanning left to
// right. Shared by corpus tagging and by match-mode entity detection.
std::vector<Span> longest_name_matches(const TokenSeq& tokens, const NameTrie& trie);

}  // namespace cfnt

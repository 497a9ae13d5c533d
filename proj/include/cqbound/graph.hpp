#pragma once

#include <vector>

#include "cqbound/common.hpp"

namespace cqbound {

// Undirected communication graph over processing nodes, as adjacency lists.
struct NodeGraph {
    std::vector<std::vector<int>> neighbors;

    int size() const { return static_cast<int>(neighbors.size()); }

    int max_degree() const {
        std::size_t d = 0;
        for (const auto& n : neighbors) d = std::max(d, n.size());
        return static_cast<int>(d);
    }

    bool connected() const {
        if (neighbors.empty()) return false;
        std::vector<char> seen(neighbors.size(), 0);
        std::vector<int> stack{0};
        seen[0] = 1;
        int count = 1;
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            for (int w : neighbors[v]) {
                if (!seen[w]) {
                    seen[w] = 1;
                    ++count;
                    stack.push_back(w);
                }
            }
        }
        return count == size();
    }
};

}  // namespace cqbound

#include "approxflow/transform.hpp"

#include <sstream>

#include "approxflow/error.hpp"

namespace approxflow {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

std::string describe(const TransformOp& op) {
  return std::visit(
      Overloaded{
          [](const MapOp& m) { return "map(" + m.name + ")"; },
          [](const FlatMapOp& m) { return "flatMap(" + m.name + ")"; },
          [](const MapValuesOp& m) { return "mapValues(" + m.name + ")"; },
          [](const FilterOp& f) { return "filter(" + f.name + ")"; },
          [](const SampleOp& s) {
            std::ostringstream os;
            os << "sample(" << s.rate << ")";
            return os.str();
          },
      },
      op);
}

std::string stage_label(const TransformChain& chain, std::size_t index) {
  return "op[" + std::to_string(index) + "] " + describe(chain.ops.at(index));
}

void validate(const TransformChain& chain) {
  for (std::size_t i = 0; i < chain.ops.size(); ++i) {
    const bool ok = std::visit(
        Overloaded{
            [](const MapOp& m) { return static_cast<bool>(m.fn); },
            [](const FlatMapOp& m) { return static_cast<bool>(m.fn); },
            [](const MapValuesOp& m) { return static_cast<bool>(m.fn); },
            [](const FilterOp& f) { return static_cast<bool>(f.pred); },
            [](const SampleOp& s) { return s.rate > 0.0 && s.rate < 1.0; },
        },
        chain.ops[i]);
    if (!ok) {
      throw UsageError(stage_label(chain, i) +
                       ": invalid transform (missing function or sample rate outside (0,1))");
    }
  }
}

bool has_sample(const TransformChain& chain) {
  for (const auto& op : chain.ops) {
    if (std::holds_alternative<SampleOp>(op)) return true;
  }
  return false;
}

const char* to_string(Aggregation agg) { return agg == Aggregation::Sum ? "sum" : "mean"; }

}  // namespace approxflow

#include "avsd/dataset_io.hpp"

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

namespace avsd {

using nlohmann::json;

void write_dataset(std::ostream& os, const std::vector<TaskInstance>& instances) {
  for (const auto& inst : instances) {
    json views = json::array();
    for (const auto& v : inst.views) views.push_back({{"kind", to_string(v.kind)}, {"tokens", v.tokens}});
    json ops = json::array();
    for (Op op : inst.ops) ops.push_back(to_string(op));
    const json rec = {{"id", inst.id},          {"modulus", inst.modulus},
                      {"problem", inst.problem_tokens}, {"answer", inst.answer_tokens},
                      {"chain", inst.chain},    {"operands", inst.operands},
                      {"ops", ops},             {"views", views}};
    os << rec.dump() << '\n';
  }
}

void write_dataset(const std::filesystem::path& path, const std::vector<TaskInstance>& instances) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open dataset for writing: " + path.string());
  write_dataset(os, instances);
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

std::vector<TaskInstance> read_dataset(std::istream& is) {
  std::vector<TaskInstance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto rec = json::parse(line);
      TaskInstance inst;
      inst.id = rec.at("id").get<std::uint64_t>();
      inst.modulus = rec.at("modulus").get<int>();
      inst.problem_tokens = rec.at("problem").get<std::vector<Token>>();
      inst.answer_tokens = rec.at("answer").get<std::vector<Token>>();
      inst.chain = rec.at("chain").get<std::vector<int>>();
      inst.operands = rec.at("operands").get<std::vector<int>>();
      for (const auto& op : rec.at("ops")) inst.ops.push_back(parse_op(op.get<std::string>()));
      for (const auto& v : rec.at("views")) {
        inst.views.push_back(View{parse_view_kind(v.at("kind").get<std::string>()),
                                  v.at("tokens").get<std::vector<Token>>()});
      }
      if (inst.chain.empty() || inst.views.empty()) throw RejectedInput("empty chain or views");
      out.push_back(std::move(inst));
    } catch (const json::exception& e) {
      throw RejectedInput("dataset line " + std::to_string(line_no) + ": " + e.what());
    } catch (const RejectedInput& e) {
      throw RejectedInput("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<TaskInstance> read_dataset(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open dataset: " + path.string());
  return read_dataset(is);
}

}  // namespace avsd

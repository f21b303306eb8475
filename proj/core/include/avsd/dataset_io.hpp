#pragma once

// Line-delimited dataset records, one instance per line:
//   {"id":..,"modulus":..,"problem":[..],"answer":[..],"chain":[..],
//    "operands":[..],"ops":[..],"views":[{"kind":"full_solution","tokens":[..]},..]}

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "avsd/task.hpp"

namespace avsd {

void write_dataset(std::ostream& os, const std::vector<TaskInstance>& instances);
void write_dataset(const std::filesystem::path& path, const std::vector<TaskInstance>& instances);

std::vector<TaskInstance> read_dataset(std::istream& is);
std::vector<TaskInstance> read_dataset(const std::filesystem::path& path);

}  // namespace avsd

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace neckscope {

// One library operation and the command line that reaches it.
struct CommandBinding {
  std::string module, op, command;
};

const std::vector<CommandBinding>& command_registry();

// args excludes the program name. Exit codes: 0 ok, 1 a verification failed,
// 2 invalid input.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Line plot of every numeric column of a CSV table against its first column.
std::string svg_from_csv(const std::string& csv, const std::string& title);

}  // namespace neckscope

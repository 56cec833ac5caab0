#include "sssbathy/cli.hpp"

int main(int argc, char** argv) { return sssbathy::run_cli({argv, argv + argc}); }

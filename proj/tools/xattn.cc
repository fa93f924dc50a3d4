#include "xattn/commands.h"

int main(int argc, char** argv) { return xattn::run_cli(argc, argv); }

#include "htclip/cli.hpp"

int main(int argc, char** argv) { return htclip::dispatch(argc, argv); }

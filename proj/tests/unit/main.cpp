#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "sonofield/error.hpp"

int main(int argc, char** argv) {
    sonofield::set_warnings_enabled(false);
    doctest::Context ctx(argc, argv);
    return ctx.run();
}

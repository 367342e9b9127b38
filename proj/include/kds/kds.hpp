#pragma once
// Umbrella header for the whole library.

#include "kds/core.hpp"
#include "kds/numerics.hpp"
#include "kds/spacetime.hpp"
#include "kds/symbols.hpp"
#include "kds/dynamics.hpp"
#include "kds/absorption.hpp"
#include "kds/resonances.hpp"
#include "kds/shooting.hpp"
#include "kds/mellin.hpp"
#include "kds/io.hpp"
#include "kds/cli.hpp"

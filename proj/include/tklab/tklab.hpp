#pragma once

/// Umbrella header for the tklab library.

#include "tklab/core.hpp"
#include "tklab/funcspace.hpp"
#include "tklab/psh.hpp"
#include "tklab/kahler.hpp"
#include "tklab/orbitvol.hpp"
#include "tklab/io.hpp"
#include "tklab/verify.hpp"
#include "tklab/cli.hpp"

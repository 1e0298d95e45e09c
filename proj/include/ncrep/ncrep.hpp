#pragma once

#include "ncrep/config.hpp"
#include "ncrep/error.hpp"
#include "ncrep/matrix_core.hpp"
#include "ncrep/algebra.hpp"
#include "ncrep/states.hpp"
#include "ncrep/expectations.hpp"
#include "ncrep/hoffman_rossi.hpp"
#include "ncrep/jensen.hpp"
#include "ncrep/random.hpp"
#include "ncrep/instance.hpp"
#include "ncrep/suite.hpp"

"""
dsdkit - Startup Script
Environment check, then CLI dispatch
"""
import sys
import os
import logging

# Add project root to Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    stream=sys.stderr
)
logger = logging.getLogger(__name__)


def check_environment():
    """Check that the numeric stack imports"""
    logger.info("🔍 Checking environment...")

    missing = []
    for module in ("numpy", "pandas", "pydantic", "pydantic_settings", "structlog"):
        try:
            __import__(module)
        except ImportError:
            missing.append(module)

    if missing:
        logger.error(f"❌ Missing packages: {', '.join(missing)}")
        logger.error("💡 Try: pip install -r requirements.txt")
        return False

    if not os.path.exists(".env"):
        logger.info("ℹ️  No .env file, using DSD_* environment variables and defaults")

    logger.info("✅ Environment check passed")
    return True


def start_cli():
    """Dispatch to the dsdkit command line"""
    try:
        from dsdkit.cli import execute
    except ImportError as e:
        logger.error(f"❌ Import error: {e}")
        sys.exit(1)
    sys.exit(execute(sys.argv[1:]))


if __name__ == "__main__":
    if check_environment():
        start_cli()
    else:
        logger.error("❌ Environment check failed. Please fix the issues above.")
        sys.exit(1)

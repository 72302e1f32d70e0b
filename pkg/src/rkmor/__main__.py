from rkmor.cli import main

raise SystemExit(main())
